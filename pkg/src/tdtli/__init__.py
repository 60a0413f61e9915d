"""Time-domain Talbot-Lau interferometry with pulsed ionization gratings."""

from .core import (
    CONSTANTS,
    GRATING_PERIOD,
    ClusterSpecies,
    DomainError,
    GratingPulse,
    PulseSequence,
    build_species_family,
    de_broglie_wavelength,
    talbot_time,
)
from .engine import InertialEnvironment, delta_sn, three_pulse_signal
from .ensemble import BeamEnsemble, GaussianDist, seeded_beam

__all__ = [
    "CONSTANTS",
    "GRATING_PERIOD",
    "BeamEnsemble",
    "ClusterSpecies",
    "DomainError",
    "GaussianDist",
    "GratingPulse",
    "InertialEnvironment",
    "PulseSequence",
    "build_species_family",
    "de_broglie_wavelength",
    "delta_sn",
    "seeded_beam",
    "talbot_time",
    "three_pulse_signal",
]
