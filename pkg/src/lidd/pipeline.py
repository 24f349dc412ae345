"""End-to-end experiment: ground state, induced potentials, widths, background.

Outputs (all CSV with a header row):

fig2_left.csv   tf_radius_um, y_um, potential_Hz
fig2_right.csv  tf_radius_um, atom_number, max_acceleration_m_s2, line_a_m_s2,
                line_b_m_s2, center_potential_Hz, center_depth_Hz,
                peak_abs_potential_y_Hz, pancakes_per_side
fig3.csv        angle_deg, sigma_{x,y,z}_{coherent,incoherent,total},
                residual_{x,y,z}, flagged_{x,y,z}, raman_nath_ratio,
                peak_abs_potential_y_Hz

Widths are sigma of a centred Gaussian fitted to the 1D projected momentum
density, in recoils of the flash beam. A flag of 1 marks a poor Gaussian fit
or a width pinned at the edge of the momentum window.
"""

from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
import hashlib
import json
import logging
import math
import os
import platform
import sys
import tempfile
import warnings

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig
from .grid import GridSpec, read_field, write_field
from .groundstate import (Wavefunction, default_gpe_grid, fit_tf_radius, ground_state, resample,
                          scale_density, GroundStateReport)
from .kernel import flash_kernel_params
from .optics import dipole_for, saturation_parameter, scattering_rate, steady_state_dipole
from .potential import axis_cut, induced_potential, induced_potentials, max_acceleration
from .ramannath import (RAMAN_NATH_WARN, fit_width, momentum_distribution, phase_imprint,
                        raman_nath_check)
from .scattering import background_width, combine_quadrature
from .units import saturation_intensity

log = logging.getLogger(__name__)

WORKERS_ENV = "LIDD_WORKERS"

STAGE_CODES = {
    "config": 3,
    "ground_state": 4,
    "density": 5,
    "potential": 6,
    "fig2": 7,
    "fig3": 8,
    "scattering": 9,
    "output": 10,
    "plot": 11,
}


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def exit_code(self):
        return STAGE_CODES.get(self.stage, 1)


@contextmanager
def stage(name):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise PipelineError(name, exc) from exc


def worker_count(cfg):
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return max(1, int(cfg.output.get("workers", 1)))


# -- reference accelerations ----------------------------------------------

def radiation_pressure_limit(species):
    """hbar k Gamma / (4 m): radiation-pressure acceleration at s = 1."""
    return species.const.hbar * species.k0 * species.gamma / (4 * species.mass)


def diffusion_limit(species, flash_time):
    """rms recoil momentum after ``flash_time`` at rate Gamma/4, divided by t m.

    Each photon adds one absorption and one emission recoil, so
    <p^2> = 2 (hbar k)^2 R t.
    """
    hk = species.const.hbar * species.k0
    rate = species.gamma / 4
    return hk * math.sqrt(2 * rate * flash_time) / (flash_time * species.mass)


# -- ground state with cache ------------------------------------------------

def _gs_key(cfg):
    payload = {"species": cfg.species, "trap": cfg.trap, "gpe": cfg.gpe, "version": 1}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def cache_entries(cache_dir):
    if not os.path.isdir(cache_dir):
        return []
    out = []
    for name in sorted(os.listdir(cache_dir)):
        if name.endswith(".report.json"):
            with open(os.path.join(cache_dir, name)) as fh:
                out.append(json.load(fh))
    return out


def clear_cache(cache_dir):
    n = 0
    if os.path.isdir(cache_dir):
        for name in os.listdir(cache_dir):
            if name.startswith("gs_"):
                os.remove(os.path.join(cache_dir, name))
                n += 1
    return n


def solve_ground_state(cfg):
    """Ground state on the private solver grid, loaded from cache if present."""
    species, trap = cfg.species_params(), cfg.trap_params()
    N = cfg.atom_number
    cache_dir = cfg.output.get("cache_dir")
    use_cache = bool(cfg.output.get("use_cache", True)) and cache_dir
    key = _gs_key(cfg)
    if use_cache:
        base = os.path.join(cache_dir, f"gs_{key}")
        if os.path.exists(base + ".report.json") and os.path.exists(base + ".bin"):
            f = read_field(base + ".bin")
            with open(base + ".report.json") as fh:
                meta = json.load(fh)
            log.info("ground state loaded from cache %s", base)
            return Wavefunction(f, meta["atom_number"]), GroundStateReport(**meta["report"])
    grid = default_gpe_grid(trap, species, N, int(cfg.gpe["radial_points"]), int(cfg.gpe["axial_points"]))
    wf, rep = ground_state(trap, species, N, grid, cfg.gpe_options())
    if use_cache:
        os.makedirs(cache_dir, exist_ok=True)
        base = os.path.join(cache_dir, f"gs_{key}")
        write_field(base + ".bin", wf.field)
        meta = {"key": key, "atom_number": wf.atom_number, "report": _jsonable(rep.to_dict()),
                "species": cfg.species, "trap": cfg.trap, "gpe": cfg.gpe}
        _atomic_json(base + ".report.json", meta)
    return wf, rep


# -- sweep points ----------------------------------------------------------

def prepare_density(cfg, wf, grid, radius):
    """Ground state on ``grid``, stretched to ``radius`` at the configured peak density."""
    on_grid = resample(wf, grid)
    r0 = fit_tf_radius(grid, np.abs(on_grid.values) ** 2)
    return scale_density(on_grid, radius, keep_peak_density=True,
                         peak_density=cfg.sweep.get("peak_density"), current_radius=r0)


def _kernel(cfg, angle):
    species = cfg.species_params()
    flash = cfg.flash_params(angle)
    d = dipole_for(flash, species)
    return flash_kernel_params(d, angle, flash.wavelength, flash.propagation, species.const.epsilon0)


def _um(x):
    return float(f"{x * 1e6:.12g}")


def fig2_rows(cfg, wf):
    species = cfg.species_params()
    h = species.const.h
    radii = list(cfg.sweep["tf_radii"])
    grid = cfg.interaction_grid(max(radii))
    angle = cfg.flash["angle_deg"]
    kp = _kernel(cfg, angle)
    stack = cfg.stack_spec()
    on_grid = resample(wf, grid)
    r0 = fit_tf_radius(grid, np.abs(on_grid.values) ** 2)
    line_a = radiation_pressure_limit(species)
    line_b = diffusion_limit(species, cfg.flash["flash_time"])
    psis = []
    for rho in radii:
        with stage("density"):
            psis.append(scale_density(on_grid, rho, keep_peak_density=True,
                                      peak_density=cfg.sweep.get("peak_density"), current_radius=r0))
    with stage("potential"):
        results = induced_potentials([p.density() for p in psis], kp, stack)
    c = grid.centre_index
    left, right = [], []
    for rho, psi, (V, info) in zip(radii, psis, results):
        y, cut = axis_cut(V, "y")
        for yi, vi in zip(y, cut):
            left.append((_um(rho), _um(yi), vi / h))
        acc, _, _ = max_acceleration(V, species.mass)
        vc = V.values[c] / h
        right.append((_um(rho), psi.atom_number, acc, line_a, line_b, vc, abs(vc),
                      float(np.max(np.abs(cut))) / h, info.M))
    return left, right, grid


def _fig3_point(args):
    cfg_si, angle, values, grid_dict, atom_number = args
    cfg = ExperimentConfig(**cfg_si)
    species = cfg.species_params()
    grid = GridSpec.from_dict(grid_dict)
    from .grid import ComplexField3D
    psi = Wavefunction(ComplexField3D(grid, values), atom_number)
    flash = cfg.flash_params(angle)
    kp = _kernel(cfg, angle)
    with stage("potential"):
        V, info = induced_potential(psi.density(), kp, cfg.stack_spec(), return_info=True)
    hbar = species.const.hbar
    t = flash.flash_time
    imprinted = phase_imprint(psi, V, t, hbar)
    spec = momentum_distribution(imprinted, flash.k)
    coh = [fit_width(spec, ax) for ax in "xyz"]
    rn = raman_nath_check(psi, V, t, hbar, species.mass, flash.k)
    with stage("scattering"):
        if flash.intensity > 0:
            inc = background_width(flash, species, cfg.scatter_config(), angle)
        else:
            inc = np.zeros(3)
    _, cut = axis_cut(V, "y")
    row = [angle]
    for i, w in enumerate(coh):
        row += [w.sigma_coherent, float(inc[i]), combine_quadrature(w.sigma_coherent, float(inc[i]))]
    row += [w.fit_residual for w in coh]
    row += [int(w.flagged) for w in coh]
    row += [rn, float(np.max(np.abs(cut))) / species.const.h]
    return row, info.M


FIG3_HEADER = ["angle_deg",
               "sigma_x_coherent", "sigma_x_incoherent", "sigma_x_total",
               "sigma_y_coherent", "sigma_y_incoherent", "sigma_y_total",
               "sigma_z_coherent", "sigma_z_incoherent", "sigma_z_total",
               "residual_x", "residual_y", "residual_z",
               "flagged_x", "flagged_y", "flagged_z",
               "raman_nath_ratio", "peak_abs_potential_y_Hz"]
FIG2_LEFT_HEADER = ["tf_radius_um", "y_um", "potential_Hz"]
FIG2_RIGHT_HEADER = ["tf_radius_um", "atom_number", "max_acceleration_m_s2", "line_a_m_s2",
                     "line_b_m_s2", "center_potential_Hz", "center_depth_Hz",
                     "peak_abs_potential_y_Hz", "pancakes_per_side"]


def fig3_rows(cfg, wf, workers=1, point_dir=None):
    radius = cfg.sweep["fig3_radius"]
    grid = cfg.interaction_grid(radius)
    with stage("density"):
        psi = prepare_density(cfg, wf, grid, radius)
    args = [(cfg.to_si_dict(), float(a), psi.values, grid.to_dict(), psi.atom_number)
            for a in cfg.sweep["angles"]]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_fig3_point, args))
    else:
        results = [_fig3_point(a) for a in args]
    if point_dir is not None:
        os.makedirs(point_dir, exist_ok=True)
        for row, M in results:
            _atomic_json(os.path.join(point_dir, f"fig3_{row[0]:07.3f}.json"), {"row": row, "M": M})
    return [r for r, _ in results], [M for _, M in results], grid, psi


# -- output ----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_json(path, obj):
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_csv(path):
    """Columns of a CSV written by ``write_csv`` as a dict of float arrays."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {h: data[:, i] for i, h in enumerate(header)}


def derived_quantities(cfg):
    species = cfg.species_params()
    flash = cfg.flash_params()
    out = {
        "d_ge_Cm": species.d_ge,
        "omega0_rad_s": species.omega0,
        "gamma_rad_s": species.gamma,
        "saturation_intensity_W_m2": saturation_intensity(species),
        "saturation_parameter": saturation_parameter(flash, species),
        "photons_per_atom": scattering_rate(flash, species) * flash.flash_time,
        "recoil_wavenumber_rad_m": flash.k,
        "line_a_m_s2": radiation_pressure_limit(species),
        "line_b_m_s2": diffusion_limit(species, flash.flash_time),
    }
    if flash.intensity > 0:
        d = steady_state_dipole(flash, species)
        out["dipole_Cm"] = d
        out["dipole_Debye"] = d / species.const.debye
    else:
        out["dipole_Cm"] = 0.0
    return out


@dataclass
class OutputBundle:
    directory: str
    files: dict = field(default_factory=dict)
    ground_state: GroundStateReport = None
    fig2_right: list = None
    fig3: list = None
    raman_nath: dict = None


def run(cfg, outdir=None, do_fig2=True, do_fig3=True):
    """Run the whole pipeline and write CSVs, a manifest and a validity report."""
    outdir = outdir or cfg.output["directory"]
    os.makedirs(outdir, exist_ok=True)
    workers = worker_count(cfg)
    bundle = OutputBundle(outdir)
    with stage("ground_state"):
        wf, rep = solve_ground_state(cfg)
    bundle.ground_state = rep
    manifest = {
        "config": cfg.to_toml_dict(),
        "resolved_si": cfg.to_si_dict(),
        "derived": derived_quantities(cfg),
        "ground_state": rep.to_dict(),
        "ground_state_grid": wf.grid.to_dict(),
        "seeds": {"scatter": cfg.scatter["seed"]},
        "workers": workers,
        "versions": {"lidd": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "width_convention": "sigma of centred Gaussian fit to 1D projected momentum density, recoils",
    }
    if do_fig2:
        with stage("fig2"):
            left, right, g2 = fig2_rows(cfg, wf)
        with stage("output"):
            write_csv(os.path.join(outdir, "fig2_left.csv"), FIG2_LEFT_HEADER, left)
            write_csv(os.path.join(outdir, "fig2_right.csv"), FIG2_RIGHT_HEADER, right)
        bundle.files["fig2_left"] = os.path.join(outdir, "fig2_left.csv")
        bundle.files["fig2_right"] = os.path.join(outdir, "fig2_right.csv")
        bundle.fig2_right = right
        manifest["fig2_grid"] = g2.to_dict()
    if do_fig3:
        with stage("fig3"):
            rows, Ms, g3, psi = fig3_rows(cfg, wf, workers, os.path.join(outdir, "points"))
        with stage("output"):
            write_csv(os.path.join(outdir, "fig3.csv"), FIG3_HEADER, rows)
        bundle.files["fig3"] = os.path.join(outdir, "fig3.csv")
        bundle.fig3 = rows
        angles = [r[0] for r in rows]
        ratios = [r[FIG3_HEADER.index("raman_nath_ratio")] for r in rows]
        flagged = [a for a, v in zip(angles, ratios) if v > RAMAN_NATH_WARN]
        for a, v in zip(angles, ratios):
            if v > RAMAN_NATH_WARN:
                warnings.warn(f"Raman-Nath ratio {v:.3g} at {a:g} deg exceeds {RAMAN_NATH_WARN}")
        bundle.raman_nath = {"angle_deg": angles, "ratio": ratios, "warn_threshold": RAMAN_NATH_WARN,
                             "flagged_angles_deg": flagged, "valid": not flagged,
                             "definition": "kinetic energy gained during the flash / max |V|"}
        with stage("output"):
            _atomic_json(os.path.join(outdir, "raman_nath.json"), bundle.raman_nath)
        bundle.files["raman_nath"] = os.path.join(outdir, "raman_nath.json")
        manifest["fig3_grid"] = g3.to_dict()
        manifest["fig3_atom_number"] = psi.atom_number
        manifest["fig3_pancakes_per_side"] = {"angle_deg": [r[0] for r in rows], "M": list(Ms)}
    with stage("output"):
        _atomic_json(os.path.join(outdir, "manifest.json"), manifest)
    bundle.files["manifest"] = os.path.join(outdir, "manifest.json")
    return bundle


# -- convergence study -----------------------------------------------------

KNOBS = ("grid_spacing", "padding", "stack_M", "dtau")


def _observables(cfg, wf, pad_factor=2.0):
    species = cfg.species_params()
    radius = cfg.sweep["fig3_radius"]
    grid = cfg.interaction_grid(radius)
    psi = prepare_density(cfg, wf, grid, radius)
    kp = _kernel(cfg, 0.0)
    V = induced_potential(psi.density(), kp, cfg.stack_spec(), pad_factor=pad_factor)
    _, cut = axis_cut(V, "y")
    acc, _, _ = max_acceleration(V, species.mass)
    flash = cfg.flash_params(0.0)
    spec = momentum_distribution(phase_imprint(psi, V, flash.flash_time, species.const.hbar), flash.k)
    return {"peak_abs_potential_y_Hz": float(np.max(np.abs(cut))) / species.const.h,
            "max_acceleration_m_s2": acc,
            "sigma_x_coherent_phi0": fit_width(spec, "x").sigma_coherent}


def convergence_study(cfg, knob, values, tol=1e-2):
    """Repeat the pipeline over one discretisation knob.

    grid_spacing: spacing in m (z points rescaled to keep the z extent)
    padding: transverse zero-padding factor of the convolution
    stack_M: pancakes per side (fixed, no adaptive extension)
    dtau: final imaginary-time step in s
    Returns a list of rows (value, observables..., relative changes) and a flag.
    """
    if knob not in KNOBS:
        raise ValueError(f"unknown knob {knob!r}; choose from {KNOBS}")
    rows = []
    wf = None
    if knob != "dtau":
        with stage("ground_state"):
            wf, rep = solve_ground_state(cfg)
    for v in values:
        c = cfg
        pad = 2.0
        if knob == "grid_spacing":
            h0 = cfg.grid["spacing"]
            nz = int(cfg.grid["points"][2])
            nz_new = max(4, 2 * int(round(nz * h0 / v / 2)))
            c = cfg.with_overrides(grid={"spacing": float(v), "points": [0, 0, nz_new]})
        elif knob == "padding":
            pad = float(v)
        elif knob == "stack_M":
            c = cfg.with_overrides(stack={"M": int(v), "check_convergence": False})
        elif knob == "dtau":
            c = cfg.with_overrides(gpe={"dtau": float(v)})
            with stage("ground_state"):
                wf, rep = solve_ground_state(c)
        obs = _observables(c, wf, pad)
        if knob == "dtau":
            obs["chemical_potential_Hz"] = rep.chemical_potential
        rows.append({"value": v, **obs})
    keys = [k for k in rows[0] if k != "value"]
    changes = []
    for prev, cur in zip(rows, rows[1:]):
        changes.append({k: abs(cur[k] - prev[k]) / abs(prev[k]) if prev[k] else 0.0 for k in keys})
    for r, ch in zip(rows[1:], changes):
        for k in keys:
            r[f"rel_change_{k}"] = ch[k]
    converged = bool(changes) and all(v <= tol for v in changes[-1].values())
    return {"knob": knob, "rows": rows, "converged": converged, "tol": tol}
