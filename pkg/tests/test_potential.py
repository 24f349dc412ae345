import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lidd.grid import PERIODIC, ScalarField3D, make_grid
from lidd.kernel import flash_kernel_params, kernel_value
from lidd.potential import (NO_STACK, PERIODIC_Z, ConvergenceError, StackSpec, axis_cut,
                            direct_sum_potential, induced_potential, induced_potentials, max_acceleration)
from lidd.units import CONSTANTS

H = 785e-9 / 32
LAM = 780.249e-9
KP = flash_kernel_params(5.26 * CONSTANTS.debye, 0.0, LAM)


def random_density(shape, seed, boundary="padded"):
    g = make_grid(shape, H, boundary=boundary)
    return ScalarField3D(g, np.random.default_rng(seed).random(g.shape) * 1e21)


def rel_linf(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.mark.parametrize("angle", [0.0, 54.7356, 90.0])
@pytest.mark.parametrize("stack", [NO_STACK, StackSpec(M=3, check_convergence=False),
                                   StackSpec(mode=PERIODIC_Z)])
def test_fft_matches_direct_sum(angle, stack):
    n = random_density((8, 8, 16), 7)
    kp = flash_kernel_params(5e-30, angle, LAM)
    assert rel_linf(induced_potential(n, kp, stack).values, direct_sum_potential(n, kp, stack).values) <= 1e-10


def test_fft_matches_direct_sum_periodic_transverse():
    n = random_density((8, 8, 16), 8, boundary=(PERIODIC, PERIODIC, "padded"))
    for stack in (StackSpec(M=2, check_convergence=False), StackSpec(mode=PERIODIC_Z)):
        assert rel_linf(induced_potential(n, KP, stack).values, direct_sum_potential(n, KP, stack).values) <= 1e-10


def test_non_integer_period_generic_path():
    g = make_grid((8, 8, 8), 30e-9)
    n = ScalarField3D(g, np.random.default_rng(1).random(g.shape))
    stack = StackSpec(M=2, check_convergence=False)
    assert rel_linf(induced_potential(n, KP, stack).values, direct_sum_potential(n, KP, stack).values) <= 1e-10
    with pytest.raises(ValueError):
        induced_potential(n, KP, StackSpec(mode=PERIODIC_Z))


def test_delta_density_gives_kernel():
    g = make_grid((8, 8, 8), H)
    v = np.zeros(g.shape)
    src = (3, 4, 5)
    v[src] = 1.0 / g.cell_volume  # one atom
    V = induced_potential(ScalarField3D(g, v), KP).values
    x, y, z = (g.axis(i) for i in range(3))
    for tgt in [(0, 0, 0), (7, 2, 1), (3, 4, 6), (5, 5, 5)]:
        r = [a[t] - a[s] for a, t, s in zip((x, y, z), tgt, src)]
        assert V[tgt] == pytest.approx(kernel_value(r, KP), rel=1e-10)
    assert V[src] == pytest.approx(0.0, abs=1e-12 * np.abs(V).max())


def test_two_body_energy():
    g = make_grid((4, 4, 8), H)
    v = np.zeros(g.shape)
    a, b = (1, 1, 1), (2, 3, 6)
    v[a] = v[b] = 1.0 / g.cell_volume
    V = direct_sum_potential(ScalarField3D(g, v), KP).values
    r = [g.axis(i)[b[i]] - g.axis(i)[a[i]] for i in range(3)]
    assert V[a] == pytest.approx(kernel_value(r, KP), rel=1e-12)
    assert V[b] == pytest.approx(kernel_value(r, KP), rel=1e-12)


def test_zero_density():
    g = make_grid((8, 8, 16), H)
    z = ScalarField3D(g, np.zeros(g.shape))
    assert not np.any(induced_potential(z, KP, StackSpec(M=2, check_convergence=False)).values)
    assert not np.any(direct_sum_potential(z, KP).values)


def test_uniform_periodic_is_constant():
    g = make_grid((16, 16, 16), H, boundary=PERIODIC)
    n = ScalarField3D(g, np.full(g.shape, 9.7e20))
    V = induced_potential(n, KP, StackSpec(mode=PERIODIC_Z)).values
    assert (V.max() - V.min()) <= 1e-8 * np.abs(V).max()
    acc, _, _ = max_acceleration(ScalarField3D(g, V), 1.44e-25)
    # gradient of a constant up to round-off
    assert acc <= 1e-8 * np.abs(V).max() / H / 1.44e-25


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    n1 = random_density((8, 8, 16), seed)
    n2 = random_density((8, 8, 16), seed + 1)
    stack = StackSpec(M=2, check_convergence=False)
    V1 = induced_potential(n1, KP, stack).values
    V2 = induced_potential(n2, KP, stack).values
    # densities must stay non-negative, so combine with |a|, |b|
    a, b = abs(a), abs(b)
    V = induced_potential(ScalarField3D(n1.grid, a * n1.values + b * n2.values), KP, stack).values
    ref = a * V1 + b * V2
    if np.max(np.abs(ref)) > 0:
        assert rel_linf(V, ref) <= 1e-10


def test_d_squared_scaling():
    n = random_density((8, 8, 16), 2)
    k1 = flash_kernel_params(1e-30, 30.0, LAM)
    k3 = flash_kernel_params(3e-30, 30.0, LAM)
    assert rel_linf(induced_potential(n, k3).values, 9 * induced_potential(n, k1).values) <= 1e-12


def test_stack_convergence_reports_M():
    g = make_grid((16, 16, 16), H)
    x, y, z = g.coords()
    n = ScalarField3D(g, np.exp(-(x * x + y * y) / (2 * (80e-9) ** 2) - z * z / (2 * (20e-9) ** 2)) * 1e21)
    V, info = induced_potential(n, KP, StackSpec(M=4, convergence_tol=1e-3), return_info=True)
    assert info.converged and info.relative_change <= 1e-3 and info.M >= 4
    fixed = induced_potential(n, KP, StackSpec(M=info.M, check_convergence=False)).values
    np.testing.assert_allclose(V.values, fixed, rtol=1e-12, atol=1e-12 * np.abs(fixed).max())
    doubled = induced_potential(n, KP, StackSpec(M=2 * info.M, check_convergence=False)).values
    assert rel_linf(doubled, V.values) <= 1e-3
    with pytest.raises(ConvergenceError):
        induced_potential(n, KP, StackSpec(M=1, convergence_tol=1e-12, M_cap=3))


def test_input_errors():
    n = random_density((8, 8, 8), 0)
    with pytest.raises(ValueError):
        induced_potential(n, KP, grid=make_grid((8, 8, 16), H))
    bad = ScalarField3D(n.grid, -n.values)
    with pytest.raises(ValueError):
        induced_potential(bad, KP)
    with pytest.raises(ValueError):
        direct_sum_potential(random_density((32, 32, 32), 0), KP)
    with pytest.raises(ValueError):
        StackSpec(M=-1)
    with pytest.raises(ValueError):
        induced_potential(n, KP, pad_factor=0.5)


def test_max_acceleration_ramp_and_zero():
    g = make_grid((8, 8, 8), H)
    x, y, z = g.coords()
    F, m = 3e-20, 1.44e-25
    V = ScalarField3D(g, F * x + 0 * y + 0 * z)
    acc, idx, pos = max_acceleration(V, m)
    assert acc == pytest.approx(F / m, rel=1e-12)
    assert max_acceleration(ScalarField3D(g, np.zeros(g.shape)), m)[0] == 0.0
    q = ScalarField3D(g, (x * x + 0 * y + 0 * z) * F / H)
    acc, idx, pos = max_acceleration(q, m)
    assert idx[0] in (0, 7)


def test_axis_cut():
    g = make_grid((8, 10, 12), H)
    x, y, z = g.coords()
    c = axis_cut(ScalarField3D(g, np.full(g.shape, 2.5)), "z")[1]
    np.testing.assert_array_equal(c, 2.5)
    f = ScalarField3D(g, np.cos(x / H) * (y / H) ** 2 * np.exp(z / H / 10))
    coords, cut = axis_cut(f, "y")
    np.testing.assert_allclose(cut, (coords / H) ** 2, rtol=1e-14)


def test_batch_equals_separate_calls():
    g = make_grid((16, 16, 16), H)
    x, y, z = g.coords()
    stack = StackSpec(M=2, convergence_tol=1e-3)
    dens = [ScalarField3D(g, np.exp(-(x * x + y * y) / (2 * w**2) - z * z / (2 * (20e-9) ** 2)) * 1e21)
            for w in (40e-9, 90e-9)]
    batch = induced_potentials(dens, KP, stack)
    for d, (V, info) in zip(dens, batch):
        W, winfo = induced_potential(d, KP, stack, return_info=True)
        np.testing.assert_array_equal(V.values, W.values)
        assert info.M == winfo.M
