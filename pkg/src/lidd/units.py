"""Physical constants, unit helpers and the Rb-87 parameter set.

All quantities are SI. Frequencies cross the package boundary as plain
frequencies (Hz) and are stored internally as angular frequencies (rad/s).
"""

from dataclasses import dataclass, field, replace
import math

import scipy.constants as sc


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = sc.hbar
    h: float = sc.h
    c: float = sc.c
    epsilon0: float = sc.epsilon_0
    bohr_radius: float = sc.physical_constants["Bohr radius"][0]
    debye: float = 1e-21 / sc.c

    def __post_init__(self):
        for name in ("hbar", "h", "c", "epsilon0", "bohr_radius", "debye"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


CONSTANTS = PhysicalConstants()

# Optical lattice laser; sets the default grid spacing and pancake period.
LATTICE_WAVELENGTH = 785e-9


def hz_to_angular(f):
    return 2 * math.pi * f


def angular_to_hz(omega):
    return omega / (2 * math.pi)


def energy_to_hz(energy, const=CONSTANTS):
    """Energy in J reported as E/h in Hz."""
    return energy / const.h


def two_level_dipole(gamma, omega0, const=CONSTANTS):
    """Dipole matrix element consistent with a two-level spontaneous rate."""
    return math.sqrt(3 * math.pi * const.epsilon0 * const.hbar * const.c**3 * gamma / omega0**3)


@dataclass(frozen=True)
class SpeciesParams:
    """Two-level reduction of one atomic species.

    ``gamma`` and ``omega0`` are angular frequencies. ``omega0`` is derived
    from ``lambda0``; ``d_ge`` defaults to the two-level value for ``gamma``.
    """

    mass: float
    gamma: float
    lambda0: float
    a_s: float
    d_ge: float = None
    omega0: float = field(init=False)
    const: PhysicalConstants = CONSTANTS

    def __post_init__(self):
        if not (self.mass > 0 and self.gamma > 0 and self.lambda0 > 0):
            raise ValueError("mass, gamma and lambda0 must be positive")
        object.__setattr__(self, "omega0", 2 * math.pi * self.const.c / self.lambda0)
        if self.d_ge is None:
            object.__setattr__(self, "d_ge", two_level_dipole(self.gamma, self.omega0, self.const))
        if not self.d_ge > 0:
            raise ValueError("d_ge must be positive")

    @property
    def k0(self):
        """Wavenumber of the bare transition (rad/m)."""
        return 2 * math.pi / self.lambda0

    @property
    def recoil_velocity(self):
        return self.const.hbar * self.k0 / self.mass

    def with_overrides(self, **kw):
        # d_ge is re-derived only when the caller did not pin it
        if "gamma" in kw or "lambda0" in kw:
            kw.setdefault("d_ge", None)
        return replace(self, **kw)


def rb87_defaults(const=CONSTANTS):
    """Rb-87 on the D2 line, F=2 -> F'=3."""
    return SpeciesParams(
        mass=1.44e-25,
        gamma=hz_to_angular(6.07e6),
        lambda0=780.249e-9,
        a_s=100 * const.bohr_radius,
        const=const,
    )


def saturation_intensity(species):
    """pi h c Gamma / (3 lambda^3) in W/m^2, Gamma in rad/s."""
    c = species.const
    return math.pi * c.h * c.c * species.gamma / (3 * species.lambda0**3)


def detuning_in_linewidths(detuning_hz, species):
    """Ratio of a plain-frequency detuning to Gamma/2pi."""
    return hz_to_angular(detuning_hz) / species.gamma
