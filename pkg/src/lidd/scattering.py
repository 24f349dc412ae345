"""Monte Carlo recoil statistics of spontaneously scattered photons.

Each scattered photon gives one recoil along the flash direction (absorption)
and one along a random emission direction. Counts per atom are Poisson with
mean R*t from the two-level scattering rate.
"""

from dataclasses import dataclass
import math

import numpy as np

from .kernel import polarization_vector
from .optics import scattering_rate

ISOTROPIC = "isotropic"
DIPOLE = "dipole"


@dataclass(frozen=True)
class ScatterConfig:
    """``emission_axis`` is used by the dipole pattern, sin^2 about that axis."""

    emission_pattern: str = DIPOLE
    emission_axis: tuple = (1.0, 0.0, 0.0)
    rng_seed: int = 12345
    samples: int = 100_000
    workers: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.emission_pattern not in (ISOTROPIC, DIPOLE):
            raise ValueError(f"unknown emission pattern {self.emission_pattern!r}")


@dataclass
class RecoilStats:
    mean: np.ndarray    # recoils, per axis
    sigma: np.ndarray   # recoils, per axis
    mean_photons: float
    samples: int
    seed: int
    raw: np.ndarray = None


def pattern_pdf(u, pattern, axis=(1.0, 0.0, 0.0)):
    """Emission probability per steradian for unit vectors ``u`` (..., 3)."""
    u = np.asarray(u, dtype=float)
    if pattern == ISOTROPIC:
        return np.full(u.shape[:-1], 1 / (4 * math.pi))
    a = np.asarray(axis, dtype=float)
    c = u @ (a / np.linalg.norm(a))
    return 3 / (8 * math.pi) * (1 - c * c)


def _orthonormal_frame(a):
    a = a / np.linalg.norm(a)
    t = np.array([1.0, 0.0, 0.0]) if abs(a[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    b1 = np.cross(a, t)
    b1 /= np.linalg.norm(b1)
    b2 = np.cross(a, b1)
    return a, b1, b2


def sample_directions(rng, n, pattern, axis=(1.0, 0.0, 0.0)):
    phi = rng.uniform(0, 2 * math.pi, n)
    if pattern == ISOTROPIC:
        c = rng.uniform(-1, 1, n)
    else:
        # cos(theta) density ~ (1 - c^2) on [-1, 1], by rejection (acceptance 2/3)
        c = np.empty(0)
        while c.size < n:
            m = int(1.6 * (n - c.size)) + 16
            trial = rng.uniform(-1, 1, m)
            keep = rng.uniform(0, 1, m) < 1 - trial * trial
            c = np.concatenate([c, trial[keep]])
        c = c[:n]
    s = np.sqrt(1 - c * c)
    a, b1, b2 = _orthonormal_frame(np.asarray(axis, dtype=float))
    return (c[:, None] * a + (s * np.cos(phi))[:, None] * b1 + (s * np.sin(phi))[:, None] * b2)


def _simulate_chunk(seed, samples, mean_photons, prop, pattern, axis):
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean_photons, samples)
    p = np.outer(counts, prop)
    total = int(counts.sum())
    if total:
        dirs = sample_directions(rng, total, pattern, axis)
        owner = np.repeat(np.arange(samples), counts)
        for i in range(3):
            p[:, i] += np.bincount(owner, weights=dirs[:, i], minlength=samples)
    return p


def simulate_recoils(flash, species, cfg, keep_raw=False):
    """Per-axis mean and standard deviation of the recoil momentum (recoils)."""
    mean_photons = scattering_rate(flash, species) * flash.flash_time
    prop = np.asarray(flash.propagation, dtype=float)
    prop = prop / np.linalg.norm(prop)
    workers = max(1, int(cfg.workers))
    children = np.random.SeedSequence(cfg.rng_seed).spawn(workers)
    sizes = [cfg.samples // workers + (i < cfg.samples % workers) for i in range(workers)]
    args = [(s, n, mean_photons, prop, cfg.emission_pattern, cfg.emission_axis)
            for s, n in zip(children, sizes) if n]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_simulate_chunk, *zip(*args)))
    else:
        parts = [_simulate_chunk(*a) for a in args]
    p = np.concatenate(parts)
    return RecoilStats(p.mean(axis=0), p.std(axis=0, ddof=1) if len(p) > 1 else np.zeros(3),
                       mean_photons, cfg.samples, cfg.rng_seed, p if keep_raw else None)


def closed_form_stats(mean_photons, prop=(0.0, 1.0, 0.0), pattern=ISOTROPIC, axis=(1.0, 0.0, 0.0)):
    """Compound-Poisson mean and sigma per axis (recoils).

    For a Poisson number of photons with mean L, each adding X = prop + u,
    mean = L E[X] and variance = L E[X^2].
    """
    prop = np.asarray(prop, dtype=float)
    prop = prop / np.linalg.norm(prop)
    if pattern == ISOTROPIC:
        second = np.full(3, 1 / 3)
    else:
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        # <u_i u_j> = (2/5) delta_ij - (1/5) a_i a_j for the sin^2 pattern
        second = 2 / 5 - a * a / 5
    mean = mean_photons * prop
    var = mean_photons * (prop * prop + second)
    return mean, np.sqrt(var)


def background_width(flash, species, cfg, angle_deg=None):
    """Per-axis recoil sigma with dipole emission about the flash polarization."""
    angle = flash.polarization_angle_deg if angle_deg is None else angle_deg
    axis = tuple(polarization_vector(angle))
    c = ScatterConfig(DIPOLE, axis, cfg.rng_seed, cfg.samples, cfg.workers)
    return simulate_recoils(flash, species, c).sigma


def combine_quadrature(sigma_coherent, sigma_incoherent):
    if sigma_coherent < 0 or sigma_incoherent < 0:
        raise ValueError("widths must be non-negative")
    return math.hypot(sigma_coherent, sigma_incoherent)
