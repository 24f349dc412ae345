"""Retarded interaction energy of two parallel, coherently driven dipoles."""

from dataclasses import dataclass
import math

import numpy as np

from .grid import ScalarField3D
from .units import CONSTANTS


@dataclass(frozen=True)
class KernelParams:
    """Dipole magnitude ``d`` (C m), drive wave vector ``k_vec`` (rad/m) and
    the common unit polarization vector of both dipoles."""

    d: float
    k_vec: tuple
    polarization: tuple
    epsilon0: float = CONSTANTS.epsilon0

    def __post_init__(self):
        k = np.asarray(self.k_vec, dtype=float)
        e = np.asarray(self.polarization, dtype=float)
        if k.shape != (3,) or e.shape != (3,):
            raise ValueError("k_vec and polarization must be 3-vectors")
        if self.d < 0:
            raise ValueError("dipole magnitude must be non-negative")
        if abs(np.linalg.norm(e) - 1) > 1e-12:
            raise ValueError("polarization must be a unit vector")
        knorm = np.linalg.norm(k)
        if knorm > 0 and abs(e @ k) > 1e-12 * knorm:
            raise ValueError("polarization must be transverse to k_vec")
        object.__setattr__(self, "k_vec", tuple(k))
        object.__setattr__(self, "polarization", tuple(e))

    @property
    def k(self):
        return float(np.linalg.norm(self.k_vec))

    @property
    def prefactor(self):
        return self.d**2 / (4 * math.pi * self.epsilon0)


def polarization_vector(angle_deg):
    """Linear polarization in the x-z plane, 0 deg = x, 90 deg = z."""
    a = math.radians(angle_deg)
    e = np.array([math.cos(a), 0.0, math.sin(a)])
    # exact zeros keep the transversality check clean at the end points
    e[np.abs(e) < 1e-16] = 0.0
    return e / np.linalg.norm(e)


def flash_kernel_params(d, angle_deg, wavelength, propagation=(0.0, 1.0, 0.0),
                        epsilon0=CONSTANTS.epsilon0):
    prop = np.asarray(propagation, dtype=float)
    prop = prop / np.linalg.norm(prop)
    return KernelParams(d, tuple(2 * math.pi / wavelength * prop), tuple(polarization_vector(angle_deg)),
                        epsilon0)


def _evaluate(x, y, z, params):
    """Kernel on broadcast coordinate arrays; r = 0 entries come back as 0."""
    kx, ky, kz = params.k_vec
    ex, ey, ez = params.polarization
    k = params.k
    r2 = x * x + y * y + z * z
    zero = r2 == 0
    r2 = np.where(zero, 1.0, r2)
    r = np.sqrt(r2)
    kr = k * r
    cos2 = (ex * x + ey * y + ez * z) ** 2 / r2
    ckr = np.cos(kr)
    bracket = (1 - 3 * cos2) * (ckr + kr * np.sin(kr)) - (1 - cos2) * kr * kr * ckr
    out = params.prefactor * np.cos(kx * x + ky * y + kz * z) / (r2 * r) * bracket
    return np.where(zero, 0.0, out)


def kernel_value(r, params):
    """Interaction energy (J) of a dipole at the origin with one at ``r``.

    ``r`` may be a single 3-vector or an array of shape (..., 3).
    """
    r = np.asarray(r, dtype=float)
    if r.shape[-1] != 3:
        raise ValueError("r must have trailing dimension 3")
    if np.any(np.sum(r * r, axis=-1) == 0):
        raise ValueError("kernel is singular at r = 0")
    out = _evaluate(r[..., 0], r[..., 1], r[..., 2], params)
    return float(out) if out.ndim == 0 else out


def kernel_on_lattice(dx, dy, dz, params):
    """Kernel on broadcast displacement arrays with the r = 0 entry zeroed."""
    return _evaluate(dx, dy, dz, params)


def tabulate_kernel(grid, params):
    """Kernel sampled at every grid point, read as a displacement from r = 0."""
    x, y, z = grid.coords()
    return ScalarField3D(grid, kernel_on_lattice(x, y, z, params), unit="J")
