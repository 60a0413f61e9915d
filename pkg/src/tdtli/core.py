"""Constants, species and pulse records, and closed-form single-particle relations.

Masses are given in amu and converted to kg here; every other quantity is SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import scipy.constants as _sc


class DomainError(ValueError):
    """An input lies outside the domain of a physical relation."""


@dataclass(frozen=True)
class PhysicalConstants:
    planck_h: float = _sc.h
    hbar: float = _sc.hbar
    amu: float = _sc.physical_constants["atomic mass constant"][0]
    light_speed: float = _sc.c


CONSTANTS = PhysicalConstants()

LASER_WAVELENGTH = 157.63e-9
GRATING_PERIOD = LASER_WAVELENGTH / 2.0

# standard atomic weights; monoisotopic masses of the dominant isotopes
_ATOMIC_MASS_AVERAGE = {"C": 12.011, "H": 1.008}
_ATOMIC_MASS_MONO = {"C": 12.0, "H": 1.00782503207}


def anthracene_mass(monoisotopic: bool = False) -> float:
    """Mass of one C14H10 molecule in amu."""
    table = _ATOMIC_MASS_MONO if monoisotopic else _ATOMIC_MASS_AVERAGE
    return 14 * table["C"] + 10 * table["H"]


MONOMER_SIGMA = 1.1e-20
MONOMER_ALPHA = 25.4e-30


@dataclass(frozen=True)
class ClusterSpecies:
    n_units: int
    mass: float  # amu
    sigma_abs: float  # m^2
    alpha_vol: float  # m^3
    ionization_yield: float = 1.0

    def __post_init__(self) -> None:
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")
        if self.sigma_abs < 0 or self.alpha_vol < 0:
            raise DomainError("cross section and polarizability must be non-negative")
        if not 0.0 <= self.ionization_yield <= 1.0:
            raise DomainError(f"ionization yield {self.ionization_yield} not in [0, 1]")


@dataclass(frozen=True)
class GratingPulse:
    fire_time: float
    period_d: float = GRATING_PERIOD
    n0: float = 0.0
    phi0: float = 0.0
    modulation_depth_V: float = 1.0
    tilt_theta: float = 0.0

    def __post_init__(self) -> None:
        if not self.period_d > 0:
            raise DomainError("grating period must be positive")
        if self.n0 < 0:
            raise DomainError("n0 must be non-negative")
        if not 0.0 <= self.modulation_depth_V <= 1.0:
            raise DomainError("modulation depth must lie in [0, 1]")
        if abs(self.tilt_theta) >= 0.1:
            raise DomainError("tilt outside the small-angle regime (|theta| < 0.1 rad)")


@dataclass(frozen=True)
class PulseSequence:
    g1: GratingPulse
    g2: GratingPulse
    g3: GratingPulse

    def __post_init__(self) -> None:
        if not (self.g1.fire_time < self.g2.fire_time < self.g3.fire_time):
            raise DomainError("pulse fire times must be strictly increasing")

    @property
    def T(self) -> float:
        return self.g2.fire_time - self.g1.fire_time

    @property
    def dT(self) -> float:
        return (self.g3.fire_time - self.g2.fire_time) - self.T

    @property
    def delays(self) -> tuple[float, float]:
        return self.T, self.g3.fire_time - self.g2.fire_time

    @property
    def pulses(self) -> tuple[GratingPulse, GratingPulse, GratingPulse]:
        return self.g1, self.g2, self.g3

    @classmethod
    def build(
        cls,
        T: float,
        dT: float = 0.0,
        gratings: Sequence[dict] | dict | None = None,
        t0: float = 0.0,
    ) -> "PulseSequence":
        """Three pulses at t0, t0 + T and t0 + 2T + dT.

        `gratings` is either one keyword dict shared by all pulses or three
        dicts, one per pulse.
        """
        if gratings is None:
            gratings = {}
        if isinstance(gratings, dict):
            gratings = [gratings] * 3
        times = (t0, t0 + T, t0 + 2 * T + dT)
        g = [GratingPulse(fire_time=t, **kw) for t, kw in zip(times, gratings)]
        return cls(*g)

    def with_dT(self, dT: float) -> "PulseSequence":
        t3 = self.g2.fire_time + self.T + dT
        return PulseSequence(self.g1, self.g2, replace(self.g3, fire_time=t3))


def _positive(name: str, value: float) -> None:
    if not value > 0:
        raise DomainError(f"{name} must be positive, got {value}")


def talbot_time(mass: float, period_d: float = GRATING_PERIOD,
                constants: PhysicalConstants = CONSTANTS) -> float:
    """Talbot time m d^2 / h in seconds for `mass` in amu."""
    _positive("mass", mass)
    _positive("period_d", period_d)
    return mass * constants.amu * period_d**2 / constants.planck_h


def de_broglie_wavelength(mass: float, speed: float,
                          constants: PhysicalConstants = CONSTANTS) -> float:
    _positive("mass", mass)
    _positive("speed", speed)
    return constants.planck_h / (mass * constants.amu * speed)


def constant_yield(value: float = 1.0) -> Callable[[int], float]:
    return lambda n: value


def step_yield(threshold_n: int, below: float = 0.1, above: float = 1.0) -> Callable[[int], float]:
    """Yield `below` for clusters smaller than `threshold_n`, `above` otherwise."""
    return lambda n: below if n < threshold_n else above


def build_species_family(
    N_range: Sequence[int],
    sigma1: float = MONOMER_SIGMA,
    alpha1: float = MONOMER_ALPHA,
    gamma: float = 1.0,
    monomer_mass: float | None = None,
    yield_model: Callable[[int], float] | None = None,
) -> list[ClusterSpecies]:
    """Power-law cluster family: sigma and alpha both scale as N**gamma."""
    sizes = sorted(int(n) for n in N_range)
    if not sizes:
        raise DomainError("empty cluster-size range")
    if sizes[0] < 1:
        raise DomainError("cluster sizes start at 1")
    _positive("sigma1", sigma1)
    _positive("alpha1", alpha1)
    if monomer_mass is None:
        monomer_mass = anthracene_mass()
    if yield_model is None:
        yield_model = constant_yield(1.0)
    return [
        ClusterSpecies(
            n_units=n,
            mass=n * monomer_mass,
            sigma_abs=sigma1 * n**gamma,
            alpha_vol=alpha1 * n**gamma,
            ionization_yield=float(yield_model(n)),
        )
        for n in sizes
    ]


# ideal standing wave: the antinode carries four times the incident fluence
ANTINODE_FACTOR = 4.0


def n0_from_fluence(sigma_abs: float, incident_fluence: float,
                    wavelength: float = LASER_WAVELENGTH,
                    constants: PhysicalConstants = CONSTANTS) -> float:
    """Mean number of photons absorbed at an antinode."""
    if sigma_abs < 0:
        raise DomainError("sigma_abs must be non-negative")
    _positive("incident_fluence", incident_fluence)
    _positive("wavelength", wavelength)
    photon_energy = constants.planck_h * constants.light_speed / wavelength
    return sigma_abs * ANTINODE_FACTOR * incident_fluence / photon_energy


def phi0_from_polarizability(alpha_vol: float, incident_fluence: float,
                             constants: PhysicalConstants = CONSTANTS) -> float:
    """Peak dipole phase imprinted at an antinode."""
    if alpha_vol < 0 or incident_fluence < 0:
        raise DomainError("polarizability and fluence must be non-negative")
    return 2 * math.pi * alpha_vol * ANTINODE_FACTOR * incident_fluence / (
        constants.hbar * constants.light_speed)


def phase_to_absorption_ratio(alpha_vol: float, sigma_abs: float,
                              wavelength: float = LASER_WAVELENGTH) -> float:
    """phi0 / n0, independent of fluence."""
    _positive("sigma_abs", sigma_abs)
    return 4 * math.pi**2 * alpha_vol / (sigma_abs * wavelength)


def modulation_depth(reflectivity: float) -> float:
    """Standing-wave intensity visibility 2 sqrt(R) / (1 + R)."""
    if not 0.0 <= reflectivity <= 1.0:
        raise DomainError("reflectivity must lie in [0, 1]")
    return 2 * math.sqrt(reflectivity) / (1 + reflectivity)


@dataclass(frozen=True)
class GratingLoad:
    """Per-species grating strengths derived from a fluence (or set directly)."""

    n0: float
    phi0: float


def grating_load(species: ClusterSpecies, incident_fluence: float,
                 wavelength: float = LASER_WAVELENGTH) -> GratingLoad:
    return GratingLoad(
        n0=n0_from_fluence(species.sigma_abs, incident_fluence, wavelength),
        phi0=phi0_from_polarizability(species.alpha_vol, incident_fluence),
    )


DEFAULT_REFLECTIVITY = 0.96
DEFAULT_MODULATION_DEPTH = modulation_depth(DEFAULT_REFLECTIVITY)
