"""Steady-state two-level optics of the flash beam."""

from dataclasses import dataclass
import math

from .units import hz_to_angular, saturation_intensity


@dataclass(frozen=True)
class FlashParams:
    """Flash beam. ``detuning`` is angular (rad/s), laser minus atom."""

    intensity: float
    detuning: float
    polarization_angle_deg: float = 0.0
    propagation: tuple = (0.0, 1.0, 0.0)
    wavelength: float = 780.249e-9
    flash_time: float = 300e-9

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError("intensity must be non-negative")
        if not 0 <= self.polarization_angle_deg <= 90:
            raise ValueError("polarization angle must lie in [0, 90] degrees")
        if not self.flash_time > 0:
            raise ValueError("flash time must be positive")

    @property
    def k(self):
        return 2 * math.pi / self.wavelength


def experiment_flash(species, angle_deg=0.0, intensity_sat=1120.0, detuning_hz=100e6, flash_time=300e-9):
    """Flash at a multiple of Isat and a plain-frequency detuning."""
    return FlashParams(
        intensity=intensity_sat * saturation_intensity(species),
        detuning=hz_to_angular(detuning_hz),
        polarization_angle_deg=angle_deg,
        wavelength=species.lambda0,
        flash_time=flash_time,
    )


def saturation_parameter(flash, species):
    i_rel = flash.intensity / saturation_intensity(species)
    return i_rel / (1 + 4 * (flash.detuning / species.gamma) ** 2)


def rabi_frequency(flash, species):
    return species.gamma * math.sqrt(flash.intensity / (2 * saturation_intensity(species)))


def steady_state_dipole(flash, species):
    """Amplitude of the driven dipole, 2 (d_ge/Omega) s/(s+1) sqrt(delta^2 + Gamma^2/4)."""
    if not flash.intensity > 0:
        raise ValueError("steady-state dipole needs a positive intensity")
    s = saturation_parameter(flash, species)
    omega = rabi_frequency(flash, species)
    return 2 * species.d_ge / omega * s / (s + 1) * math.hypot(flash.detuning, species.gamma / 2)


def max_dipole(species):
    c = species.const
    return math.sqrt(3 * species.gamma * c.epsilon0 * c.h * c.c**3 / (4 * species.omega0**3))


def optimal_intensity(detuning, species):
    """Intensity at which the steady-state dipole is maximal (s = 1)."""
    return saturation_intensity(species) * (1 + 4 * (detuning / species.gamma) ** 2)


def scattering_rate(flash, species):
    """Photons per second, (Gamma/2) s/(1+s)."""
    s = saturation_parameter(flash, species)
    return species.gamma / 2 * s / (1 + s)


def dipole_for(flash, species):
    """Steady-state dipole, 0 for a dark flash."""
    return steady_state_dipole(flash, species) if flash.intensity > 0 else 0.0
