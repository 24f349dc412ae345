"""Uniform 3D lattices, fields on them, transforms, projections and I/O.

Arrays are indexed ``[ix, iy, iz]`` (z fastest in memory).
"""

from dataclasses import dataclass, field
import json
import math

import numpy as np
import scipy.fft as sfft

from .units import LATTICE_WAVELENGTH

PADDED = "padded"
PERIODIC = "periodic"
AXES = {"x": 0, "y": 1, "z": 2}

DEFAULT_SPACING = LATTICE_WAVELENGTH / 32


def _axis_index(axis):
    if isinstance(axis, str):
        return AXES[axis]
    if axis not in (0, 1, 2):
        raise ValueError(f"bad axis {axis!r}")
    return axis


def _triple(v, cast=float):
    if np.ndim(v) == 0:
        return (cast(v),) * 3
    v = tuple(cast(x) for x in v)
    if len(v) != 3:
        raise ValueError("expected three components")
    return v


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred cubic lattice.

    ``origin`` is the coordinate of index (0, 0, 0); by default the grid is
    centred so that index ``n // 2`` sits at zero on every axis. ``spacing``
    may be given per axis; the interaction grid uses a single value.
    """

    n: tuple = (64, 64, 128)
    spacing: tuple = DEFAULT_SPACING
    origin: tuple = None
    boundary: tuple = (PADDED, PADDED, PADDED)

    def __post_init__(self):
        n = _triple(self.n, int)
        h = _triple(self.spacing)
        for ni in n:
            if ni < 4 or ni % 2:
                raise ValueError(f"grid dimensions must be even and >= 4, got {n}")
        if min(h) <= 0:
            raise ValueError("spacing must be positive")
        origin = self.origin
        if origin is None:
            origin = tuple(-(ni // 2) * hi for ni, hi in zip(n, h))
        origin = _triple(origin)
        boundary = self.boundary
        if isinstance(boundary, str):
            boundary = (boundary,) * 3
        boundary = tuple(b.lower() for b in boundary)
        for b in boundary:
            if b not in (PADDED, PERIODIC):
                raise ValueError(f"unknown boundary {b!r}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "boundary", boundary)

    @property
    def shape(self):
        return self.n

    @property
    def size(self):
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def extent(self):
        return tuple(ni * hi for ni, hi in zip(self.n, self.spacing))

    @property
    def cell_volume(self):
        return self.spacing[0] * self.spacing[1] * self.spacing[2]

    @property
    def isotropic(self):
        return max(self.spacing) - min(self.spacing) <= 1e-12 * max(self.spacing)

    @property
    def centre_index(self):
        return tuple(ni // 2 for ni in self.n)

    def axis(self, axis):
        i = _axis_index(axis)
        return self.origin[i] + self.spacing[i] * np.arange(self.n[i])

    def coords(self, sparse=True):
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij", sparse=sparse)

    def wavenumbers(self, axis):
        """Angular wavenumbers in FFT order (signed alias convention)."""
        i = _axis_index(axis)
        return 2 * np.pi * np.fft.fftfreq(self.n[i], d=self.spacing[i])

    def kgrid(self, sparse=True):
        return np.meshgrid(*(self.wavenumbers(i) for i in range(3)), indexing="ij", sparse=sparse)

    def k_spacing(self, axis):
        i = _axis_index(axis)
        return 2 * np.pi / self.extent[i]

    def with_boundary(self, boundary):
        return GridSpec(self.n, self.spacing, self.origin, boundary)

    def to_dict(self):
        return {"n": list(self.n), "spacing": list(self.spacing),
                "origin": list(self.origin), "boundary": list(self.boundary)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["n"]), tuple(d["spacing"]), tuple(d["origin"]), tuple(d["boundary"]))


def make_grid(n=(64, 64, 128), spacing=DEFAULT_SPACING, origin=None, boundary=PADDED):
    return GridSpec(n, spacing, origin, boundary)


def same_grid(a, b, rtol=1e-12):
    return (a.n == b.n
            and np.allclose(a.spacing, b.spacing, rtol=rtol, atol=0)
            and np.allclose(a.origin, b.origin, rtol=0, atol=rtol * max(a.spacing)))


@dataclass
class ScalarField3D:
    grid: GridSpec
    values: np.ndarray
    unit: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


@dataclass
class ComplexField3D:
    grid: GridSpec
    values: np.ndarray
    spectral: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")


def fft3(f, direction="forward", workers=None):
    """Continuum-normalised 3D DFT.

    forward:  F(k) = sum_r f(r) exp(-i k.r) dV      (k in FFT order)
    inverse:  f(r) = sum_k F(k) exp(+i k.r) dk^3 / (2 pi)^3

    The phase is taken relative to index (0, 0, 0), not to the origin.
    """
    dv = f.grid.cell_volume
    if direction == "forward":
        return ComplexField3D(f.grid, sfft.fftn(f.values, workers=workers) * dv, spectral=True)
    if direction == "inverse":
        return ComplexField3D(f.grid, sfft.ifftn(f.values, workers=workers) / dv, spectral=False)
    raise ValueError(f"direction must be 'forward' or 'inverse', not {direction!r}")


def project(f, axis):
    """Integrate a scalar field over the two axes orthogonal to ``axis``."""
    i = _axis_index(axis)
    others = tuple(j for j in range(3) if j != i)
    h = f.grid.spacing
    return f.values.sum(axis=others) * h[others[0]] * h[others[1]]


def integrate(f):
    return float(f.values.sum() * f.grid.cell_volume)


# -- serialization ---------------------------------------------------------

def write_field(path, f):
    """Write ``path`` (raw little-endian, C order) plus ``path.json`` header."""
    path = str(path)
    arr = np.ascontiguousarray(f.values)
    if np.iscomplexobj(arr):
        dtype, kind = "<c16", "complex"
    else:
        dtype, kind = "<f8", "real"
    header = {"grid": f.grid.to_dict(), "dtype": dtype, "kind": kind, "order": "C (z fastest)"}
    if kind == "real":
        header["unit"] = getattr(f, "unit", "")
    else:
        header["spectral"] = bool(getattr(f, "spectral", False))
    arr.astype(dtype).tofile(path)
    with open(path + ".json", "w") as fh:
        json.dump(header, fh, indent=2)


def read_field(path):
    path = str(path)
    with open(path + ".json") as fh:
        header = json.load(fh)
    grid = GridSpec.from_dict(header["grid"])
    values = np.fromfile(path, dtype=header["dtype"]).reshape(grid.shape)
    if header["kind"] == "complex":
        return ComplexField3D(grid, values, spectral=header.get("spectral", False))
    return ScalarField3D(grid, values, unit=header.get("unit", ""))


def write_profile_csv(path, columns, header):
    """Write equal-length 1D columns as CSV with a header row."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, delimiter=",", header=",".join(header), comments="", fmt="%.10g")


def fast_even_size(n):
    """Smallest even size >= n that scipy.fft handles efficiently."""
    m = max(4, int(math.ceil(n)))
    while True:
        m = sfft.next_fast_len(m)
        if m % 2 == 0:
            return m
        m += 1
