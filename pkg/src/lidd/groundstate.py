"""Condensate ground state in one lattice site by imaginary-time propagation."""

from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np
import scipy.fft as sfft
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import map_coordinates
from scipy.optimize import OptimizeWarning, curve_fit

from .grid import ComplexField3D, GridSpec, ScalarField3D, fast_even_size, integrate, project
from .units import LATTICE_WAVELENGTH, hz_to_angular

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrapParams:
    omega_radial: float = hz_to_angular(1e3)
    omega_axial: float = hz_to_angular(105e3)
    lattice_depth: float = 100.0  # lattice recoils, informational only
    lattice_wavelength: float = LATTICE_WAVELENGTH

    def __post_init__(self):
        if not (self.omega_radial > 0 and self.omega_axial > 0):
            raise ValueError("trap frequencies must be positive")
        if self.omega_axial < 5 * self.omega_radial:
            warnings.warn("axial confinement is not much tighter than radial; pancake picture is weak")

    def potential(self, mass, x, y, z):
        return 0.5 * mass * (self.omega_radial**2 * (x * x + y * y) + self.omega_axial**2 * z * z)


@dataclass(frozen=True)
class GroundStateOptions:
    """Imaginary-time settings.

    ``warmup`` lists coarser steps relaxed before the final fixed ``dtau``;
    each stage stops when the relative energy change per unit imaginary time
    falls below ``tolerance / dtau``.
    """

    dtau: float = 1e-8
    tolerance: float = 1e-10
    max_iter: int = 200_000
    warmup: tuple = (3e-7, 1e-7)
    check_every: int = 20


@dataclass
class Wavefunction:
    field: ComplexField3D
    atom_number: float

    @property
    def grid(self):
        return self.field.grid

    @property
    def values(self):
        return self.field.values

    def density(self):
        return ScalarField3D(self.grid, np.abs(self.field.values) ** 2, unit="m^-3")

    def norm(self):
        return integrate(self.density())


def normalized(values, grid, atom_number):
    nrm = np.sum(np.abs(values) ** 2) * grid.cell_volume
    if not nrm > 0:
        raise ValueError("cannot normalise a zero wavefunction")
    return values * math.sqrt(atom_number / nrm)


@dataclass
class GroundStateReport:
    chemical_potential: float            # Hz, full mu/h
    mean_field_chemical_potential: float  # Hz, mu/h above the ideal-gas zero-point energy
    peak_density: float
    tf_radius_radial: float
    axial_1e2_radius: float
    energy_breakdown: dict = field(default_factory=dict)  # Hz per atom
    iterations: int = 0
    residual: float = float("nan")

    def to_dict(self):
        return dict(self.__dict__)


def coupling_constant(species):
    hbar = species.const.hbar
    return 4 * math.pi * hbar**2 * species.a_s / species.mass


def oscillator_length(species, omega):
    return math.sqrt(species.const.hbar / (species.mass * omega))


def tf_radius_estimate(trap, species, atom_number):
    """Radial Thomas-Fermi radius of a pancake with a Gaussian axial profile."""
    g = coupling_constant(species)
    a_z = oscillator_length(species, trap.omega_axial)
    g2d = g / (math.sqrt(2 * math.pi) * a_z)
    m, w = species.mass, trap.omega_radial
    mu2d = math.sqrt(g2d * atom_number * m * w * w / math.pi)
    return math.sqrt(2 * mu2d / (m * w * w))


def default_gpe_grid(trap, species, atom_number, radial_points=64, axial_points=32):
    """Private solver grid: transverse 2.8 R_TF, axial 8 oscillator lengths."""
    r = max(tf_radius_estimate(trap, species, atom_number),
            2.5 * oscillator_length(species, trap.omega_radial))
    a_z = oscillator_length(species, trap.omega_axial)
    hr = 2.8 * r / radial_points
    hz = 8 * a_z / axial_points
    return GridSpec((radial_points, radial_points, axial_points), (hr, hr, hz))


def _check_grid(grid, trap, species, atom_number):
    r = tf_radius_estimate(trap, species, atom_number)
    a_z = oscillator_length(species, trap.omega_axial)
    ex, ey, ez = grid.extent
    if min(ex, ey) < 2.5 * r:
        raise ValueError(f"transverse extent {min(ex, ey):.3g} m < 2.5 x TF radius {r:.3g} m")
    if ez < 6 * a_z:
        raise ValueError(f"axial extent {ez:.3g} m < 6 oscillator lengths ({a_z:.3g} m)")


class _Hamiltonian:
    def __init__(self, grid, trap, species):
        self.grid = grid
        self.hbar = species.const.hbar
        self.m = species.mass
        self.g = coupling_constant(species)
        x, y, z = grid.coords()
        self.V = trap.potential(self.m, x, y, z)
        kx, ky = (grid.wavenumbers(i) for i in (0, 1))
        kz = np.fft.rfftfreq(grid.n[2], d=grid.spacing[2]) * 2 * np.pi
        self.T = (self.hbar**2 / (2 * self.m)) * (kx[:, None, None] ** 2 + ky[None, :, None] ** 2
                                                   + kz[None, None, :] ** 2)

    def energies(self, psi):
        """(kinetic, trap, interaction) totals in J for a real psi."""
        dv = self.grid.cell_volume
        n = psi * psi
        f = sfft.rfftn(psi)
        w = np.full(f.shape[-1], 2.0)
        w[0] = 1.0
        if self.grid.n[2] % 2 == 0:
            w[-1] = 1.0
        ekin = float(np.sum(self.T * np.abs(f) ** 2 * w) / self.grid.size * dv)
        etrap = float(np.sum(self.V * n) * dv)
        eint = float(0.5 * self.g * np.sum(n * n) * dv)
        return ekin, etrap, eint

    def step_ops(self, dtau):
        return np.exp(-self.T * dtau / self.hbar), dtau / (2 * self.hbar)


def _initial_guess(grid, trap, species, atom_number):
    x, y, z = grid.coords()
    a_r = oscillator_length(species, trap.omega_radial)
    r = max(tf_radius_estimate(trap, species, atom_number), a_r)
    a_z = oscillator_length(species, trap.omega_axial)
    rho2 = x * x + y * y
    radial = np.maximum(1 - rho2 / r**2, 0.0) + 0.05 * np.exp(-rho2 / (2 * a_r**2))
    psi = np.sqrt(radial) * np.exp(-z * z / (2 * a_z**2))
    return normalized(psi, grid, atom_number)


def ground_state(trap, species, atom_number=250, grid=None, opts=GroundStateOptions(),
                 initial=None, history=None):
    """Relax to the GPE ground state; returns (Wavefunction, GroundStateReport).

    ``history``, if a list, receives (stage dtau, iteration, total energy J).
    """
    if grid is None:
        grid = default_gpe_grid(trap, species, atom_number)
    if species.a_s > 0:
        _check_grid(grid, trap, species, atom_number)
    H = _Hamiltonian(grid, trap, species)
    if initial is None:
        psi = _initial_guess(grid, trap, species, atom_number)
    else:
        psi = normalized(np.real(initial), grid, atom_number)
    shape = grid.shape
    total = 0
    residual = float("nan")
    stages = [dt for dt in opts.warmup if dt > opts.dtau] + [opts.dtau]
    for stage, dt in enumerate(stages):
        final = stage == len(stages) - 1
        kin, half = H.step_ops(dt)
        tol = opts.tolerance * dt / opts.dtau
        e_prev = sum(H.energies(psi))
        if history is not None:
            history.append((dt, total, e_prev))
        converged = False
        while total < opts.max_iter:
            for _ in range(opts.check_every):
                psi = psi * np.exp(-(H.V + H.g * psi * psi) * half)
                psi = sfft.irfftn(sfft.rfftn(psi) * kin, s=shape)
                psi = psi * np.exp(-(H.V + H.g * psi * psi) * half)
                psi = normalized(psi, grid, atom_number)
            total += opts.check_every
            e = sum(H.energies(psi))
            if history is not None:
                history.append((dt, total, e))
            residual = abs(e_prev - e) / abs(e) / opts.check_every
            e_prev = e
            if residual < tol:
                converged = True
                break
        log.info("stage dtau=%g: %d iterations, residual %.3g", dt, total, residual)
        if not converged and final:
            raise ConvergenceError(f"ground state not converged in {opts.max_iter} iterations "
                                   f"(residual {residual:.3g})")
    wf = Wavefunction(ComplexField3D(grid, psi.astype(complex)), float(atom_number))
    report = diagnostics(wf, trap, species)
    report.iterations = total
    report.residual = residual
    return wf, report


# -- diagnostics -----------------------------------------------------------

def _gauss_1e2(z, a, z0, w):
    return a * np.exp(-2 * (z - z0) ** 2 / w**2)


def _parabola(rho2, a, b):
    return np.maximum(a - b * rho2, 0.0)


def fit_axial_1e2(grid, density):
    """1/e^2 radius of the radially integrated axial profile."""
    z = grid.axis(2)
    prof = project(ScalarField3D(grid, density), 2)
    if not prof.max() > 0:
        raise FitError("empty axial profile")
    z0 = np.sum(z * prof) / np.sum(prof)
    w0 = 2 * math.sqrt(max(np.sum((z - z0) ** 2 * prof) / np.sum(prof), grid.spacing[2] ** 2))
    try:
        with warnings.catch_warnings():
            # an exact fit leaves the covariance singular; it is not used
            warnings.simplefilter("ignore", OptimizeWarning)
            p, _ = curve_fit(_gauss_1e2, z, prof, p0=(prof.max(), z0, w0))
    except RuntimeError as exc:
        raise FitError(f"axial Gaussian fit failed: {exc}") from exc
    return abs(p[2])


def radial_column_density(grid, density):
    return density.sum(axis=2) * grid.spacing[2]


def fit_tf_radius(grid, density):
    """Radius sqrt(a/b) of max(0, a - b rho^2) fitted to the column density."""
    col = radial_column_density(grid, density)
    x, y = grid.axis(0), grid.axis(1)
    rho2 = (x[:, None] ** 2 + y[None, :] ** 2).ravel()
    col = col.ravel()
    total = col.sum()
    if not col.max() > 0:
        raise FitError("empty radial profile")
    r0 = math.sqrt(3 * np.sum(rho2 * col) / total)
    a0 = col.max()
    if not r0 > 0:
        raise FitError("degenerate radial profile")
    try:
        p, _ = curve_fit(_parabola, rho2, col, p0=(a0, a0 / r0**2))
    except RuntimeError as exc:
        raise FitError(f"radial parabola fit failed: {exc}") from exc
    a, b = p
    if not (a > 0 and b > 0):
        raise FitError("flat radial profile, no Thomas-Fermi radius")
    return math.sqrt(a / b)


def diagnostics(psi, trap, species):
    grid = psi.grid
    values = psi.values
    n = np.abs(values) ** 2
    H = _Hamiltonian(grid, trap, species)
    N = psi.atom_number
    if np.iscomplexobj(values) and np.max(np.abs(values.imag)) > 1e-12 * np.max(np.abs(values)):
        ekin = _complex_kinetic(grid, values, species)
        etrap = float(np.sum(H.V * n) * grid.cell_volume)
        eint = float(0.5 * H.g * np.sum(n * n) * grid.cell_volume)
    else:
        ekin, etrap, eint = H.energies(np.real(values))
    h = species.const.h
    hbar = species.const.hbar
    mu = (ekin + etrap + 2 * eint) / N
    zero_point = hbar * (2 * trap.omega_radial + trap.omega_axial) / 2
    return GroundStateReport(
        chemical_potential=mu / h,
        mean_field_chemical_potential=(mu - zero_point) / h,
        peak_density=float(n.max()),
        tf_radius_radial=fit_tf_radius(grid, n),
        axial_1e2_radius=fit_axial_1e2(grid, n),
        energy_breakdown={"kinetic": ekin / N / h, "trap": etrap / N / h, "interaction": eint / N / h},
    )


def _complex_kinetic(grid, values, species):
    hbar, m = species.const.hbar, species.mass
    kx, ky, kz = grid.kgrid()
    f = sfft.fftn(values)
    k2 = kx**2 + ky**2 + kz**2
    return float(hbar**2 / (2 * m) * np.sum(k2 * np.abs(f) ** 2) / grid.size * grid.cell_volume)


def total_energy(psi, trap, species):
    """GPE energy functional in J."""
    H = _Hamiltonian(psi.grid, trap, species)
    return sum(H.energies(np.real(psi.values)))


# -- resampling and geometry scans ----------------------------------------

def resample(psi, grid, renormalize=True):
    """Trilinear interpolation of psi onto ``grid`` (zero outside the source)."""
    src = psi.grid
    axes = [src.axis(i) for i in range(3)]
    pts = np.stack(np.meshgrid(*(grid.axis(i) for i in range(3)), indexing="ij"), axis=-1)
    out = np.zeros(grid.shape, dtype=complex)
    for part, unit in ((psi.values.real, 1.0), (psi.values.imag, 1j)):
        if np.any(part):
            f = RegularGridInterpolator(axes, part, method="linear", bounds_error=False, fill_value=0.0)
            out = out + unit * f(pts)
    if renormalize:
        out = normalized(out, grid, psi.atom_number)
        n = psi.atom_number
    else:
        n = float(np.sum(np.abs(out) ** 2) * grid.cell_volume)
    return Wavefunction(ComplexField3D(grid, out), n)


def scale_density(psi, new_tf_radius, keep_peak_density=True, peak_density=None, current_radius=None):
    """Stretch the cloud transversely so its fitted TF radius becomes ``new_tf_radius``.

    With ``keep_peak_density`` the peak stays fixed and the atom number
    follows; otherwise the atom number is kept. ``peak_density`` (m^-3)
    additionally pins the peak to an explicit value.
    """
    if not new_tf_radius > 0:
        raise ValueError("new TF radius must be positive")
    grid = psi.grid
    half = 0.5 * min(grid.extent[0], grid.extent[1])
    if new_tf_radius >= half - grid.spacing[0]:
        raise ValueError(f"cloud of radius {new_tf_radius:.3g} m does not fit the grid (half width {half:.3g} m)")
    if current_radius is None:
        current_radius = fit_tf_radius(grid, np.abs(psi.values) ** 2)
    f = new_tf_radius / current_radius
    vals = psi.values
    if f != 1.0:
        ix = np.arange(grid.n[0], dtype=float)
        iy = np.arange(grid.n[1], dtype=float)
        cx, cy = (-grid.origin[0] / grid.spacing[0], -grid.origin[1] / grid.spacing[1])
        sx = cx + (ix - cx) / f
        sy = cy + (iy - cy) / f
        coords = np.meshgrid(sx, sy, np.arange(grid.n[2], dtype=float), indexing="ij")
        vals = (map_coordinates(vals.real, coords, order=1, mode="constant", cval=0.0)
                + 1j * map_coordinates(vals.imag, coords, order=1, mode="constant", cval=0.0))
    if peak_density is not None:
        vals = vals * math.sqrt(peak_density / np.max(np.abs(vals) ** 2))
    elif not keep_peak_density:
        vals = normalized(vals, grid, psi.atom_number)
    n = float(np.sum(np.abs(vals) ** 2) * grid.cell_volume)
    return Wavefunction(ComplexField3D(grid, vals), n)
