"""Induced potential of a dipole density by FFT convolution.

The physical cloud is a stack of identical pancakes along z with period
``StackSpec.period``. Transverse axes are zero padded (aperiodic) unless the
grid marks them periodic. Along z the stack is handled either by summing
translated copies into the kernel (``truncated``) or by a periodic box that
holds an integer number of periods (``periodic_z``).
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
import scipy.fft as sfft

from .grid import PERIODIC, ScalarField3D, same_grid, _axis_index
from .kernel import kernel_on_lattice
from .units import LATTICE_WAVELENGTH

log = logging.getLogger(__name__)

TRUNCATED = "truncated"
PERIODIC_Z = "periodic_z"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class StackSpec:
    period: float = LATTICE_WAVELENGTH / 2
    mode: str = TRUNCATED
    M: int = 64
    convergence_tol: float = 1e-3
    M_cap: int = 1024
    check_convergence: bool = True

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("stack period must be positive")
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if self.mode not in (TRUNCATED, PERIODIC_Z):
            raise ValueError(f"unknown stack mode {self.mode!r}")


NO_STACK = StackSpec(M=0, check_convergence=False)


@dataclass
class PotentialInfo:
    M: int
    relative_change: float
    converged: bool


def _period_cells(grid, period, require_integer):
    s = period / grid.spacing[2]
    si = int(round(s))
    if abs(s - si) > 1e-9 * max(1.0, s) or si < 1:
        if require_integer:
            raise ValueError(f"stack period is {s:.6g} cells, not an integer number of z cells")
        return None
    return si


def _axis_setup(grid, stack, pad_factor=2.0):
    """Per-axis (convolution length, signed displacement indices)."""
    if pad_factor < 1:
        raise ValueError("pad_factor must be >= 1")
    periodic = [grid.boundary[0] == PERIODIC, grid.boundary[1] == PERIODIC, stack.mode == PERIODIC_Z]
    sizes, disp = [], []
    for i in range(3):
        m = grid.n[i] if periodic[i] else 2 * int(math.ceil(pad_factor * grid.n[i] / 2))
        sizes.append(m)
        disp.append(np.fft.fftfreq(m, 1.0 / m).round().astype(np.int64))
    return periodic, sizes, disp


def _kernel_block(grid, kparams, disp, z_shifts_cells=None, z_shifts=None):
    """Kernel summed over z translations on the displacement lattice.

    ``z_shifts_cells`` (integers) uses plane reuse; ``z_shifts`` (metres) is
    the generic path.
    """
    hx, hy, hz = grid.spacing
    X = (disp[0] * hx)[:, None]
    Y = (disp[1] * hy)[None, :]
    iz = disp[2]
    out = np.zeros((len(disp[0]), len(disp[1]), len(iz)))
    if z_shifts_cells is not None:
        shifts = np.asarray(z_shifts_cells, dtype=np.int64)
        # plane q = iz - shift feeds every output column iz it can reach
        q_all = (iz[:, None] - shifts[None, :]).ravel()
        col_all = np.repeat(np.arange(len(iz)), len(shifts))
        order = np.argsort(q_all, kind="stable")
        q_sorted, col_sorted = q_all[order], col_all[order]
        bounds = np.flatnonzero(np.diff(q_sorted)) + 1
        for qs, cols in zip(np.split(q_sorted, bounds), np.split(col_sorted, bounds)):
            plane = kernel_on_lattice(X, Y, qs[0] * hz, kparams)
            for c in cols:
                out[:, :, c] += plane
        return out
    Z = (iz * hz)[None, None, :]
    for zs in z_shifts:
        out += kernel_on_lattice(X[:, :, None], Y[:, :, None], Z - zs, kparams)
    return out


def _stack_shifts(grid, stack, js):
    s = _period_cells(grid, stack.period, require_integer=False)
    if s is not None:
        return {"z_shifts_cells": [j * s for j in js]}
    return {"z_shifts": [j * stack.period for j in js]}


def _tile_periodic(values, grid, stack):
    s = _period_cells(grid, stack.period, require_integer=True)
    nz = grid.n[2]
    if nz % s:
        raise ValueError(f"periodic_z needs an integer number of periods per box ({nz} cells, period {s} cells)")
    out = np.zeros_like(values)
    for q in range(nz // s):
        out += np.roll(values, q * s, axis=2)
    return out


def _convolve(fn, kspec, sizes, shape, dv):
    """``fn`` and ``kspec`` are real FFTs on the convolution lattice ``sizes``."""
    res = sfft.irfftn(fn * kspec, s=sizes)
    return res[: shape[0], : shape[1], : shape[2]] * dv


def _kernel_spectrum(g, kparams, disp, stack, js):
    if stack.mode == PERIODIC_Z:
        block = _kernel_block(g, kparams, disp, z_shifts_cells=[0])
    else:
        block = _kernel_block(g, kparams, disp, **_stack_shifts(g, stack, js))
    return sfft.rfftn(block)


def _check_inputs(density):
    if np.any(density.values < 0):
        raise ValueError("density must be non-negative")


def induced_potential(density, kparams, stack=NO_STACK, grid=None, return_info=False, pad_factor=2.0):
    """V(r0) = sum_r K(r0 - r) n(r) dV over the (stacked) density.

    ``density`` is in atoms/m^3; the result is in J on the same grid.
    Aperiodic axes are zero padded to ``pad_factor`` times their length;
    2 or more gives an exact linear convolution.
    """
    if grid is not None and not same_grid(grid, density.grid):
        raise ValueError("density grid does not match solver grid")
    (V, info), = induced_potentials([density], kparams, stack, pad_factor)
    return (V, info) if return_info else V


def induced_potentials(densities, kparams, stack=NO_STACK, pad_factor=2.0):
    """Potentials of several densities on one grid, sharing every kernel spectrum.

    Each density converges its own stack sum exactly as a separate call
    would; returns a list of (ScalarField3D, PotentialInfo).
    """
    if not densities:
        return []
    g = densities[0].grid
    for d in densities:
        if not same_grid(g, d.grid):
            raise ValueError("all densities must share one grid")
        _check_inputs(d)
    periodic, sizes, disp = _axis_setup(g, stack, pad_factor)
    fns = []
    for d in densities:
        values = _tile_periodic(d.values, g, stack) if stack.mode == PERIODIC_Z else d.values
        fns.append(sfft.rfftn(values, s=sizes))
    dv = g.cell_volume
    if stack.mode == PERIODIC_Z:
        kspec = _kernel_spectrum(g, kparams, disp, stack, [0])
        return [(ScalarField3D(g, _convolve(fn, kspec, sizes, g.shape, dv), unit="J"),
                 PotentialInfo(0, 0.0, True)) for fn in fns]
    M0 = stack.M
    kspec = _kernel_spectrum(g, kparams, disp, stack, range(-M0, M0 + 1))
    Vs = [_convolve(fn, kspec, sizes, g.shape, dv) for fn in fns]
    del kspec
    infos = [PotentialInfo(M0, float("nan"), False) for _ in fns]
    if stack.check_convergence:
        _converge_stack(Vs, infos, fns, g, kparams, stack, sizes, disp)
    return [(ScalarField3D(g, V, unit="J"), info) for V, info in zip(Vs, infos)]


def _converge_stack(Vs, infos, fns, g, kparams, stack, sizes, disp):
    """Add pancakes pairwise until one more pair changes V by < tol, per density."""
    M = stack.M
    active = list(range(len(Vs)))
    while active:
        extra = _kernel_spectrum(g, kparams, disp, stack, [-(M + 1), M + 1])
        still = []
        for i in active:
            dV = _convolve(fns[i], extra, sizes, g.shape, g.cell_volume)
            scale = np.max(np.abs(Vs[i]))
            rel = np.max(np.abs(dV)) / scale if scale > 0 else 0.0
            if rel <= stack.convergence_tol:
                infos[i] = PotentialInfo(M, float(rel), True)
                continue
            if M + 1 >= stack.M_cap:
                raise ConvergenceError(f"stack sum not converged at M={M + 1} (change {rel:.3g})")
            Vs[i] = Vs[i] + dV
            still.append(i)
        active = still
        M += 1


def direct_sum_potential(density, kparams, stack=NO_STACK, max_cells=4096):
    """Brute-force pair sum with the same boundary and stacking conventions."""
    _check_inputs(density)
    g = density.grid
    if g.size > max_cells:
        raise ValueError(f"direct sum refused: {g.size} cells > cap {max_cells}")
    values = density.values
    if stack.mode == PERIODIC_Z:
        values = _tile_periodic(values, g, stack)
        shifts = [0.0]
    else:
        shifts = [j * stack.period for j in range(-stack.M, stack.M + 1)]
    periodic = [g.boundary[0] == PERIODIC, g.boundary[1] == PERIODIC, stack.mode == PERIODIC_Z]
    idx = np.indices(g.shape).reshape(3, -1).T
    w = values.reshape(-1)
    src = idx[w != 0]
    w = w[w != 0]
    h = np.asarray(g.spacing)
    n = np.asarray(g.n)
    out = np.zeros(g.size)
    for t, tgt in enumerate(idx):
        d = tgt[None, :] - src
        for i in range(3):
            if periodic[i]:
                d[:, i] = (d[:, i] + n[i] // 2) % n[i] - n[i] // 2
        r = d * h
        acc = 0.0
        for zs in shifts:
            acc += np.dot(w, kernel_on_lattice(r[:, 0], r[:, 1], r[:, 2] - zs, kparams))
        out[t] = acc
    return ScalarField3D(g, out.reshape(g.shape) * g.cell_volume, unit="J")


def max_acceleration(potential, mass):
    """Largest |grad V| / m on the grid and where it occurs.

    Second-order central differences inside, first-order one-sided at edges.
    Returns (acceleration m/s^2, index tuple, position tuple in m).
    """
    g = potential.grid
    grads = np.gradient(potential.values, *g.spacing, edge_order=1)
    mag = np.sqrt(sum(gi * gi for gi in grads)) / mass
    flat = int(np.argmax(mag))
    idx = np.unravel_index(flat, g.shape)
    pos = tuple(float(g.axis(i)[idx[i]]) for i in range(3))
    return float(mag[idx]), tuple(int(i) for i in idx), pos


def axis_cut(field, axis):
    """(coordinates, values) along ``axis`` through the grid centre."""
    i = _axis_index(axis)
    c = list(field.grid.centre_index)
    sl = list(c)
    sl[i] = slice(None)
    return field.grid.axis(i), np.array(field.values[tuple(sl)])
