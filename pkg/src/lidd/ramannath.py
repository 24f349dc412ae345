"""Phase imprint during the flash and momentum-space analysis.

Momentum density is |int exp(-i k.r) psi d^3r|^2 / (2 pi)^3, so that it
integrates to the atom number over d^3k. Momenta are reported in units of
the flash recoil hbar*k.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.fft as sfft
from scipy.optimize import curve_fit

from .grid import ComplexField3D, _axis_index, same_grid
from .groundstate import Wavefunction

RESIDUAL_WARN = 0.05
RAMAN_NATH_WARN = 0.3


class FitError(RuntimeError):
    pass


@dataclass
class MomentumSpectrum:
    """Momentum density on sorted (fftshifted) k axes."""

    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray
    density: np.ndarray
    recoil_unit: float

    @property
    def dk(self):
        return tuple(float(k[1] - k[0]) for k in (self.kx, self.ky, self.kz))

    def axis(self, axis):
        return (self.kx, self.ky, self.kz)[_axis_index(axis)]

    def total(self):
        dkx, dky, dkz = self.dk
        return float(self.density.sum() * dkx * dky * dkz)

    def projection(self, axis):
        """(k in recoils, projected density per recoil)."""
        i = _axis_index(axis)
        others = tuple(j for j in range(3) if j != i)
        dk = self.dk
        prof = self.density.sum(axis=others) * dk[others[0]] * dk[others[1]]
        return self.axis(i) / self.recoil_unit, prof * self.recoil_unit

    def mean(self, axis):
        k, p = self.projection(axis)
        return float(np.sum(k * p) / np.sum(p))

    def kinetic_energy(self, hbar, mass):
        """Mean kinetic energy per atom (J)."""
        k2 = (self.kx[:, None, None] ** 2 + self.ky[None, :, None] ** 2 + self.kz[None, None, :] ** 2)
        dkx, dky, dkz = self.dk
        n = self.total()
        return float(hbar**2 / (2 * mass) * np.sum(k2 * self.density) * dkx * dky * dkz / n)


@dataclass
class WidthReport:
    axis: str
    sigma_total: float = float("nan")
    sigma_coherent: float = float("nan")
    sigma_incoherent: float = float("nan")
    fit_residual: float = float("nan")
    flagged: bool = False


def phase_imprint(psi, potential, t, hbar):
    """psi -> exp(-i V t / hbar) psi; the density is left untouched."""
    if not same_grid(psi.grid, potential.grid):
        raise ValueError("potential and wavefunction grids differ")
    if t < 0:
        raise ValueError("interaction time must be non-negative")
    if t == 0:
        return Wavefunction(ComplexField3D(psi.grid, psi.values.copy()), psi.atom_number)
    vals = psi.values * np.exp(-1j * potential.values * (t / hbar))
    return Wavefunction(ComplexField3D(psi.grid, vals), psi.atom_number)


def momentum_distribution(psi, recoil_unit):
    g = psi.grid
    amp = sfft.fftn(psi.values) * g.cell_volume
    dens = sfft.fftshift(np.abs(amp) ** 2) / (2 * math.pi) ** 3
    ks = [sfft.fftshift(g.wavenumbers(i)) for i in range(3)]
    return MomentumSpectrum(ks[0], ks[1], ks[2], dens, recoil_unit)


def _centred_gauss(k, a, sigma):
    return a * np.exp(-k * k / (2 * sigma * sigma))


def fit_gaussian_width(k, profile):
    """Centred least-squares Gaussian fit; returns (sigma, relative residual).

    sigma is bounded by the largest |k| of the window; a profile too flat to
    be resolved comes back at that bound.
    """
    k = np.asarray(k, dtype=float)
    p = np.asarray(profile, dtype=float)
    if not p.max() > 0:
        raise FitError("empty profile")
    kmax = float(np.max(np.abs(k)))
    s0 = math.sqrt(max(np.sum(k * k * p) / np.sum(p), (k[1] - k[0]) ** 2))
    s0 = min(s0, 0.5 * kmax)
    try:
        popt, _ = curve_fit(_centred_gauss, k, p, p0=(p.max(), s0), maxfev=10000,
                            bounds=([0.0, 1e-6 * kmax], [np.inf, kmax]))
    except RuntimeError as exc:
        raise FitError(f"Gaussian fit diverged: {exc}") from exc
    a, sigma = popt
    sigma = abs(sigma)
    if not (np.isfinite(sigma) and sigma > 0):
        raise FitError("Gaussian fit gave a degenerate width")
    resid = float(np.linalg.norm(_centred_gauss(k, a, sigma) - p) / np.linalg.norm(p))
    return sigma, resid


def fit_width(spectrum, axis):
    """Coherent width (recoils) of the projected momentum density."""
    k, p = spectrum.projection(axis)
    sigma, resid = fit_gaussian_width(k, p)
    name = "xyz"[_axis_index(axis)]
    at_bound = sigma >= (1 - 1e-6) * np.max(np.abs(k))
    return WidthReport(axis=name, sigma_coherent=sigma, sigma_total=sigma,
                       fit_residual=resid, flagged=bool(resid > RESIDUAL_WARN or at_bound))


def raman_nath_check(psi_before, potential, t, hbar, mass, recoil_unit=1.0):
    """Kinetic energy gained by the imprint over the largest |V|."""
    vmax = float(np.max(np.abs(potential.values)))
    if t == 0 or vmax == 0:
        return 0.0
    before = momentum_distribution(psi_before, recoil_unit)
    after = momentum_distribution(phase_imprint(psi_before, potential, t, hbar), recoil_unit)
    gain = after.kinetic_energy(hbar, mass) - before.kinetic_energy(hbar, mass)
    return max(gain, 0.0) / vmax
