import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidd.grid import ComplexField3D, ScalarField3D, make_grid
from lidd.groundstate import Wavefunction
from lidd.ramannath import (FitError, fit_gaussian_width, fit_width, momentum_distribution, phase_imprint,
                            raman_nath_check)
from lidd.units import CONSTANTS

HBAR = CONSTANTS.hbar
M = 1.44e-25
KREC = 2 * math.pi / 780.249e-9


def gaussian_psi(shape=(64, 64, 16), h=40e-9, widths=(150e-9, 200e-9, 40e-9), n=250.0):
    g = make_grid(shape, h)
    x, y, z = g.coords()
    psi = np.exp(-(x / widths[0]) ** 2 / 4 - (y / widths[1]) ** 2 / 4 - (z / widths[2]) ** 2 / 4) + 0j
    psi *= math.sqrt(n / (np.sum(np.abs(psi) ** 2) * g.cell_volume))
    return Wavefunction(ComplexField3D(g, psi), n)


def potential(g, values):
    return ScalarField3D(g, values * np.ones(g.shape), unit="J")


def test_imprint_identity_and_density():
    wf = gaussian_psi()
    same = phase_imprint(wf, potential(wf.grid, 0.0), 0.0, HBAR)
    np.testing.assert_array_equal(same.values, wf.values)
    rng = np.random.default_rng(0)
    V = potential(wf.grid, rng.normal(size=wf.grid.shape) * 1e-26)
    out = phase_imprint(wf, V, 300e-9, HBAR)
    # unit-modulus phase factor: density unchanged up to the last bit of exp()
    n0, n1 = np.abs(wf.values) ** 2, np.abs(out.values) ** 2
    assert np.max(np.abs(n1 - n0)) <= 4 * np.finfo(float).eps * n0.max()
    with pytest.raises(ValueError):
        phase_imprint(wf, V, -1.0, HBAR)
    with pytest.raises(ValueError):
        phase_imprint(wf, potential(make_grid((8, 8, 8), 1e-8), 0.0), 1.0, HBAR)


def test_parseval_through_imprint():
    wf = gaussian_psi()
    rng = np.random.default_rng(1)
    V = potential(wf.grid, rng.normal(size=wf.grid.shape) * 1e-27)
    spec = momentum_distribution(phase_imprint(wf, V, 300e-9, HBAR), KREC)
    assert spec.total() == pytest.approx(250.0, rel=1e-9)
    assert np.all(spec.density >= 0)


def test_constant_potential_is_global_phase():
    wf = gaussian_psi()
    V = potential(wf.grid, 3.3e-27)
    a = momentum_distribution(wf, KREC)
    b = momentum_distribution(phase_imprint(wf, V, 300e-9, HBAR), KREC)
    np.testing.assert_allclose(b.density, a.density, rtol=1e-12, atol=1e-12 * a.density.max())
    assert raman_nath_check(wf, V, 300e-9, HBAR, M, KREC) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * math.pi))
def test_global_phase_invariance(phi):
    wf = gaussian_psi()
    V = potential(wf.grid, np.random.default_rng(2).normal(size=wf.grid.shape) * 1e-27)
    rot = Wavefunction(ComplexField3D(wf.grid, wf.values * np.exp(1j * phi)), wf.atom_number)
    a = momentum_distribution(phase_imprint(wf, V, 300e-9, HBAR), KREC)
    b = momentum_distribution(phase_imprint(rot, V, 300e-9, HBAR), KREC)
    np.testing.assert_allclose(b.density, a.density, rtol=1e-12, atol=1e-12 * a.density.max())


def test_linear_potential_shifts_spectrum():
    wf = gaussian_psi(shape=(64, 16, 16), widths=(300e-9, 200e-9, 60e-9))
    g = wf.grid
    x, _, _ = g.coords()
    dk = g.k_spacing(0)
    t = 300e-9
    F = 5 * dk * HBAR / t  # shift by exactly five spectral bins
    before = momentum_distribution(wf, KREC)
    after = momentum_distribution(phase_imprint(wf, potential(g, -F * x), t, HBAR), KREC)
    np.testing.assert_allclose(after.density, np.roll(before.density, 5, axis=0),
                               rtol=1e-9, atol=1e-9 * before.density.max())
    assert after.mean("x") - before.mean("x") == pytest.approx(5 * dk / KREC, rel=1e-6)
    k, p0 = before.projection("x")
    _, p1 = after.projection("x")
    s0, _ = fit_gaussian_width(k, p0)
    s1, _ = fit_gaussian_width(k - 5 * dk / KREC, p1)
    assert s1 == pytest.approx(s0, rel=1e-6)


def test_plane_wave_shift():
    wf = gaussian_psi()
    g = wf.grid
    _, y, _ = g.coords()
    k0 = 3 * g.k_spacing(1)
    mod = Wavefunction(ComplexField3D(g, wf.values * np.exp(1j * k0 * y)), wf.atom_number)
    assert momentum_distribution(mod, KREC).mean("y") == pytest.approx(k0 / KREC, rel=1e-6)


def test_gaussian_fit_exact_and_mixture():
    k = np.linspace(-20, 20, 401)
    sigma, resid = fit_gaussian_width(k, 7 * np.exp(-k * k / 18))
    assert sigma == pytest.approx(3.0, abs=1e-6)
    assert resid < 1e-8
    mix = np.exp(-k * k / 2) + 0.5 * np.exp(-k * k / 50)
    sigma, resid = fit_gaussian_width(k, mix)
    assert 1 < sigma < 5
    assert resid > 1e-3
    with pytest.raises(FitError):
        fit_gaussian_width(k, np.zeros_like(k))


def test_unresolved_width_is_flagged():
    wf = gaussian_psi()
    rng = np.random.default_rng(4)
    V = potential(wf.grid, rng.normal(size=wf.grid.shape) * 1e-24)  # white-noise phase: flat spectrum
    spec = momentum_distribution(phase_imprint(wf, V, 300e-9, HBAR), KREC)
    rep = fit_width(spec, "z")
    assert rep.flagged
    assert rep.sigma_coherent <= np.max(np.abs(spec.kz)) / KREC * (1 + 1e-9)


def test_ground_width_baseline():
    wf = gaussian_psi()
    spec = momentum_distribution(wf, KREC)
    # |psi|^2 of width w in x has momentum sigma 1/(2w) for a Gaussian psi
    rep = fit_width(spec, "x")
    assert rep.sigma_coherent == pytest.approx(1 / (2 * 150e-9) / KREC, rel=1e-3)
    assert not rep.flagged


def test_raman_nath_zero_time():
    wf = gaussian_psi()
    V = potential(wf.grid, np.random.default_rng(5).normal(size=wf.grid.shape) * 1e-27)
    assert raman_nath_check(wf, V, 0.0, HBAR, M, KREC) == 0.0
    assert raman_nath_check(wf, V, 300e-9, HBAR, M, KREC) > 0
