"""Run configuration: a YAML tree validated before any computation.

Field units are fixed and converted to SI at this boundary: masses in amu,
times in ns, energies in mJ, angles in mrad, lengths in mm (grating offsets
in nm, velocities in m/s, fluences in J/m^2).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core import (
    DEFAULT_MODULATION_DEPTH,
    MONOMER_ALPHA,
    MONOMER_SIGMA,
    ClusterSpecies,
    build_species_family,
    constant_yield,
)
from .engine import DEFAULT_FLUENCE, DEFAULT_OFF_RESONANCE, InertialEnvironment, species_sequence
from .ensemble import BeamEnsemble, seeded_beam

Triple = Union[float, tuple[float, float, float]]


class ConfigError(ValueError):
    """Invalid configuration; the message names the field and, if known, the line."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        self.field = field
        self.line = line
        where = f"{field}" + (f" (line {line})" if line else "")
        super().__init__(f"{where}: {message}" if where else message)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SpeciesSpec(_Strict):
    N: list[int] = Field(default_factory=lambda: list(range(3, 13)))
    sigma1_m2: float = MONOMER_SIGMA
    alpha1_m3: float = MONOMER_ALPHA
    gamma: float = 1.0
    monomer_mass_amu: float | None = None
    ionization_yield: float = Field(1.0, gt=0, le=1)

    @field_validator("N")
    @classmethod
    def _sizes(cls, v: list[int]) -> list[int]:
        if not v or min(v) < 1:
            raise ValueError("cluster sizes must be a non-empty list of positive integers")
        return v

    def family(self) -> list[ClusterSpecies]:
        return build_species_family(self.N, self.sigma1_m2, self.alpha1_m3, self.gamma,
                                    self.monomer_mass_amu, constant_yield(self.ionization_yield))


class SequenceSpec(_Strict):
    T_ns: float = Field(gt=0)
    dT_off_ns: float = DEFAULT_OFF_RESONANCE * 1e9
    fluence_J_m2: Triple = DEFAULT_FLUENCE
    n0: tuple[float, float, float] | None = None
    phi0: tuple[float, float, float] | None = None
    V: float = Field(DEFAULT_MODULATION_DEPTH, ge=0, le=1)
    theta_mrad: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def fluences(self) -> tuple[float, float, float]:
        f = self.fluence_J_m2
        return (float(f),) * 3 if np.isscalar(f) else tuple(f)

    @property
    def tilts(self) -> tuple[float, ...]:
        return tuple(t * 1e-3 for t in self.theta_mrad)

    def build(self, species: ClusterSpecies, dT: float = 0.0, alpha_scale: float = 1.0):
        return species_sequence(species, self.T_ns * 1e-9, dT, self.fluences, self.V,
                                self.tilts, self.n0, self.phi0, alpha_scale)


class EnsembleSpec(_Strict):
    gas: Literal["neon", "argon"] = "neon"
    v0_m_s: float | None = Field(None, gt=0)
    rel_spread: float | None = Field(None, ge=0)
    divergence_mrad: float | None = Field(None, ge=0)
    divergence_definition: Literal["std", "hwhm", "fwhm"] = "std"
    sigma_v_m_s: float | None = Field(None, gt=0)
    height_mm: float = Field(1.5, ge=0)
    height_sigma_mm: float = Field(0.0, ge=0)

    def build(self) -> BeamEnsemble:
        div = None if self.divergence_mrad is None else self.divergence_mrad * 1e-3
        return seeded_beam(self.gas, v0=self.v0_m_s, rel_spread=self.rel_spread, divergence=div,
                           divergence_definition=self.divergence_definition,
                           sigma_v=self.sigma_v_m_s, height_mean=self.height_mm * 1e-3,
                           height_sigma=self.height_sigma_mm * 1e-3)


class EnvironmentSpec(_Strict):
    acceleration_m_s2: float = 0.0
    z_mm: float = Field(1.5, ge=0)
    sigma_h_mm: float = Field(0.0, ge=0)
    offsets_nm: tuple[float, float, float] = (0.0, 0.0, 0.0)
    decay_length_mm: float | None = Field(None, gt=0)

    def build(self) -> InertialEnvironment:
        return InertialEnvironment(
            acceleration_along_grating=self.acceleration_m_s2,
            grating_offsets=tuple(o * 1e-9 for o in self.offsets_nm),
            mirror_distance=self.z_mm * 1e-3,
            beam_height_spread=self.sigma_h_mm * 1e-3,
            coherence_decay_length=None if self.decay_length_mm is None
            else self.decay_length_mm * 1e-3,
        )


class GridSpec(_Strict):
    start: float | None = None
    stop: float | None = None
    num: int | None = Field(None, ge=1)
    values: list[float] | None = None

    @model_validator(mode="after")
    def _one_form(self) -> "GridSpec":
        ranged = (self.start, self.stop, self.num)
        if self.values is None and None in ranged:
            raise ValueError("give either values or all of start, stop, num")
        if self.values is not None and any(v is not None for v in ranged):
            raise ValueError("give either values or start/stop/num, not both")
        return self

    def array(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.num)


class ScanSpec(_Strict):
    type: Literal["mass", "timing", "height", "accel"] = "mass"
    grid: GridSpec | None = None
    model: Literal["quantum", "classical", "both"] = "both"
    species_N: int | None = Field(None, ge=1)
    band: tuple[float, float] = (0.7, 1.3)


class ShotSpec(_Strict):
    n_shots: int = Field(10_000, ge=1)
    rates: list[float] | None = None
    jitter_fwhm_ns: float = Field(7.0, ge=0)
    drift_ns: float = Field(100.0, ge=0)
    energy_rel: float = Field(0.05, ge=0)
    energy_mJ: float = Field(3.0, gt=0)
    window_ns: float | None = Field(5.0, gt=0)
    energy_window_mJ: tuple[float, float] | None = None


class OutputSpec(_Strict):
    dir: str = "out"
    figures: bool = True


class RunConfig(_Strict):
    species: SpeciesSpec = Field(default_factory=SpeciesSpec)
    sequence: SequenceSpec
    ensemble: EnsembleSpec = Field(default_factory=EnsembleSpec)
    environment: EnvironmentSpec = Field(default_factory=EnvironmentSpec)
    scan: ScanSpec = Field(default_factory=ScanSpec)
    shots: ShotSpec = Field(default_factory=ShotSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int = Field(0, ge=0, lt=2**64)

    def digest(self) -> str:
        return config_digest(self)

    def models(self) -> list[str]:
        return ["quantum", "classical"] if self.scan.model == "both" else [self.scan.model]


def config_digest(cfg: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the validated tree; key order is irrelevant."""
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _line_of(node, path: tuple) -> int | None:
    """1-based source line of a key path in a composed YAML node, or of its deepest parent."""
    line = None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == str(key):
                    line, node = k.start_mark.line + 1, v
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(str(exc).splitlines()[0], "yaml",
                          mark.line + 1 if mark else None) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", "config")
    for key, value in (overrides or {}).items():
        if isinstance(value, dict):
            data[key] = {**(data.get(key) or {}), **value}
        else:
            data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        field = ".".join(str(p) for p in loc)
        msg = "missing required field" if err["type"] == "missing" else err["msg"]
        if err["type"] == "extra_forbidden":
            msg = "unknown key"
        line = _line_of(root, loc) if root is not None else None
        raise ConfigError(msg, field, line) from None


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(exc), "config") from None
    return parse_config(text, overrides)
