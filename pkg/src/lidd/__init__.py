"""Light-induced dipole-dipole interactions in a pancake-stack BEC."""

__version__ = "0.1.0"
