"""Experiment configuration.

The file format is TOML and every physical quantity carries its unit in the
key name (``detuning_MHz = 100``). Unknown keys are rejected so that a
misspelt unit cannot silently fall back to a default.
"""

from dataclasses import dataclass, field
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import DEFAULT_SPACING, GridSpec, fast_even_size
from .groundstate import GroundStateOptions, TrapParams
from .optics import FlashParams
from .potential import StackSpec
from .scattering import ScatterConfig
from .units import CONSTANTS, LATTICE_WAVELENGTH, hz_to_angular, rb87_defaults, saturation_intensity

# section -> key -> (attribute, factor to SI); factor None means "no unit"
SCHEMA = {
    "species": {
        "mass_kg": ("mass", 1.0),
        "linewidth_MHz": ("linewidth_hz", 1e6),
        "wavelength_nm": ("lambda0", 1e-9),
        "scattering_length_bohr": ("a_s", CONSTANTS.bohr_radius),
        "dipole_matrix_element_Cm": ("d_ge", 1.0),
    },
    "trap": {
        "radial_frequency_kHz": ("radial_hz", 1e3),
        "axial_frequency_kHz": ("axial_hz", 1e3),
        "lattice_depth_recoil": ("lattice_depth", None),
        "lattice_wavelength_nm": ("lattice_wavelength", 1e-9),
        "atom_number": ("atom_number", None),
    },
    "flash": {
        "intensity_Isat": ("intensity_sat", None),
        "detuning_MHz": ("detuning_hz", 1e6),
        "polarization_angle_deg": ("angle_deg", None),
        "flash_time_ns": ("flash_time", 1e-9),
        "propagation": ("propagation", None),
    },
    "grid": {
        "spacing_nm": ("spacing", 1e-9),
        "points": ("points", None),
        "min_extent_tf_radii": ("min_extent_tf_radii", None),
    },
    "gpe": {
        "dtau_s": ("dtau", 1.0),
        "tolerance": ("tolerance", None),
        "max_iter": ("max_iter", None),
        "warmup_dtau_s": ("warmup", 1.0),
        "check_every": ("check_every", None),
        "radial_points": ("radial_points", None),
        "axial_points": ("axial_points", None),
    },
    "stack": {
        "period_nm": ("period", 1e-9),
        "mode": ("mode", None),
        "pancakes_per_side": ("M", None),
        "convergence_tol": ("convergence_tol", None),
        "max_pancakes_per_side": ("M_cap", None),
        "check_convergence": ("check_convergence", None),
    },
    "scatter": {
        "pattern": ("pattern", None),
        "seed": ("seed", None),
        "samples": ("samples", None),
    },
    "sweep": {
        "tf_radius_um": ("tf_radii", 1e-6),
        "polarization_angle_deg": ("angles", None),
        "fig3_tf_radius_um": ("fig3_radius", 1e-6),
        "peak_density_m3": ("peak_density", None),
    },
    "output": {
        "directory": ("directory", None),
        "cache_dir": ("cache_dir", None),
        "use_cache": ("use_cache", None),
        "workers": ("workers", None),
    },
}


@dataclass
class ExperimentConfig:
    species: dict = field(default_factory=dict)
    trap: dict = field(default_factory=dict)
    flash: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    gpe: dict = field(default_factory=dict)
    stack: dict = field(default_factory=dict)
    scatter: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    # -- builders for the physics objects --------------------------------

    def species_params(self):
        sp = rb87_defaults()
        s = self.species
        kw = {}
        if "mass" in s:
            kw["mass"] = s["mass"]
        if "linewidth_hz" in s:
            kw["gamma"] = hz_to_angular(s["linewidth_hz"])
        if "lambda0" in s:
            kw["lambda0"] = s["lambda0"]
        if "a_s" in s:
            kw["a_s"] = s["a_s"]
        if "d_ge" in s:
            kw["d_ge"] = s["d_ge"]
        return sp.with_overrides(**kw) if kw else sp

    def trap_params(self):
        t = self.trap
        return TrapParams(hz_to_angular(t["radial_hz"]), hz_to_angular(t["axial_hz"]),
                          t["lattice_depth"], t["lattice_wavelength"])

    @property
    def atom_number(self):
        return self.trap["atom_number"]

    def flash_params(self, angle_deg=None):
        f = self.flash
        sp = self.species_params()
        return FlashParams(
            intensity=f["intensity_sat"] * saturation_intensity(sp),
            detuning=hz_to_angular(f["detuning_hz"]),
            polarization_angle_deg=f["angle_deg"] if angle_deg is None else angle_deg,
            propagation=tuple(f["propagation"]),
            wavelength=sp.lambda0,
            flash_time=f["flash_time"],
        )

    def gpe_options(self):
        g = self.gpe
        return GroundStateOptions(g["dtau"], g["tolerance"], int(g["max_iter"]), tuple(g["warmup"]),
                                  int(g["check_every"]))

    def stack_spec(self):
        s = self.stack
        return StackSpec(s["period"], s["mode"], int(s["M"]), s["convergence_tol"], int(s["M_cap"]),
                         bool(s["check_convergence"]))

    def scatter_config(self, workers=1):
        s = self.scatter
        return ScatterConfig(s["pattern"], (1.0, 0.0, 0.0), int(s["seed"]), int(s["samples"]), workers)

    def interaction_grid(self, tf_radius):
        """Interaction grid holding a cloud of ``tf_radius``.

        Transverse points of 0 mean "enough for ``min_extent_tf_radii``".
        """
        g = self.grid
        h = g["spacing"]
        nx, ny, nz = (int(v) for v in g["points"])
        need = g["min_extent_tf_radii"] * tf_radius / h
        auto = fast_even_size(need)
        nx = nx or auto
        ny = ny or auto
        return GridSpec((nx, ny, nz), h)

    def to_si_dict(self):
        return {k: dict(v) for k, v in self.__dict__.items()}

    def with_overrides(self, **sections):
        out = ExperimentConfig(**{k: dict(v) for k, v in self.__dict__.items()})
        for sec, kv in sections.items():
            getattr(out, sec).update(kv)
        return out

    # -- serialization ---------------------------------------------------

    def to_toml_dict(self):
        """Resolved values keyed with units, inverse of ``from_toml_dict``."""
        out = {}
        for sec, keys in SCHEMA.items():
            vals = getattr(self, sec)
            d = {}
            for key, (attr, factor) in keys.items():
                if attr not in vals:
                    continue
                d[key] = _from_si(vals[attr], factor)
            out[sec] = d
        return out

    def to_toml(self):
        lines = []
        for sec, d in self.to_toml_dict().items():
            lines.append(f"[{sec}]")
            for k, v in d.items():
                lines.append(f"{k} = {_toml_value(v)}")
            lines.append("")
        return "\n".join(lines)


def _to_si(value, factor):
    if factor is None:
        return value
    if isinstance(value, (list, tuple)):
        return [v * factor for v in value]
    return value * factor


def _from_si(value, factor):
    # 12 significant digits hide float noise such as 299.99999999999994 ns;
    # bit-exact values live in the manifest's resolved_si block
    if factor is None or factor == 1.0:
        return list(value) if isinstance(value, tuple) else value
    if isinstance(value, (list, tuple)):
        return [float(f"{v / factor:.12g}") for v in value]
    return float(f"{value / factor:.12g}")


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def default_config():
    r = [0.2, 0.4, 0.6, 0.8, 1.0, 1.15, 1.2, 1.4, 1.6, 1.8, 2.0]
    return ExperimentConfig(
        species={"mass": 1.44e-25, "linewidth_hz": 6.07e6, "lambda0": 780.249e-9,
                 "a_s": 100 * CONSTANTS.bohr_radius},
        trap={"radial_hz": 1e3, "axial_hz": 105e3, "lattice_depth": 100.0,
              "lattice_wavelength": LATTICE_WAVELENGTH, "atom_number": 250},
        flash={"intensity_sat": 1120.0, "detuning_hz": 100e6, "angle_deg": 0.0,
               "flash_time": 300e-9, "propagation": [0.0, 1.0, 0.0]},
        grid={"spacing": DEFAULT_SPACING, "points": [0, 0, 32], "min_extent_tf_radii": 2.5},
        gpe={"dtau": 1e-8, "tolerance": 1e-10, "max_iter": 200000, "warmup": [3e-7, 1e-7],
             "check_every": 20, "radial_points": 64, "axial_points": 32},
        stack={"period": LATTICE_WAVELENGTH / 2, "mode": "truncated", "M": 64,
               "convergence_tol": 1e-3, "M_cap": 1024, "check_convergence": True},
        scatter={"pattern": "dipole", "seed": 12345, "samples": 100000},
        sweep={"tf_radii": [x * 1e-6 for x in r], "angles": [float(a) for a in range(0, 91, 5)],
               "fig3_radius": 1.15e-6, "peak_density": 9.7e20},
        output={"directory": "lidd-out", "cache_dir": ".lidd-cache", "use_cache": True, "workers": 1},
    )


def from_toml_dict(data, base=None):
    cfg = default_config() if base is None else base.with_overrides()
    for sec, values in data.items():
        if sec not in SCHEMA:
            raise ValueError(f"unknown config section [{sec}]")
        target = getattr(cfg, sec)
        for key, value in values.items():
            if key not in SCHEMA[sec]:
                raise ValueError(f"unknown key {key!r} in [{sec}]; physical keys need a unit suffix")
            attr, factor = SCHEMA[sec][key]
            target[attr] = _to_si(value, factor)
    validate(cfg)
    return cfg


def validate(cfg):
    for a in cfg.sweep.get("angles", []):
        if not 0 <= a <= 90:
            raise ValueError(f"polarization angle {a} outside [0, 90] degrees")
    for r in cfg.sweep.get("tf_radii", []) + [cfg.sweep.get("fig3_radius", 1.0)]:
        if not r > 0:
            raise ValueError("TF radii must be positive")
    if cfg.stack["mode"] not in ("truncated", "periodic_z"):
        raise ValueError(f"unknown stack mode {cfg.stack['mode']!r}")
    if cfg.trap["atom_number"] <= 0:
        raise ValueError("atom number must be positive")


def load_config(path):
    """Read a TOML config or the ``config`` block of a run manifest (JSON)."""
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        if "resolved_si" in data:
            cfg = ExperimentConfig(**data["resolved_si"])
            validate(cfg)
            return cfg
        return from_toml_dict(data["config"])
    with open(path, "rb") as fh:
        return from_toml_dict(tomllib.load(fh))
