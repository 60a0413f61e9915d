"""Synthetic per-shot data, post-selection and the zero-count rate estimator.

Shot streams are stored as JSON lines: a header object carrying the schema
version, the seed and a digest of the truth model, then one object per shot
with times in ns and pulse energies in mJ.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .core import ClusterSpecies, DomainError, PulseSequence, n0_from_fluence, phi0_from_polarizability
from .engine import (
    DEFAULT_FLUENCE,
    DegenerateReferenceError,
    InertialEnvironment,
    resonant_signal_batch,
    three_pulse_signal,
)
from .ensemble import BeamEnsemble, ConfigurationError

SCHEMA_VERSION = 1
FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
DEFAULT_JITTER_FWHM = 7e-9
DEFAULT_DRIFT = 100e-9
DEFAULT_ENERGY_REL = 0.05
DEFAULT_PULSE_ENERGY = 3e-3  # J, the energy at which `fluences` apply
CHUNK = 4096
ZERO_COUNT_LAMBDA_LIMIT = 2.0


class SaturatedBinError(ValueError):
    """No zero-count shots in a bin, so -ln P0 is undefined."""


@dataclass(frozen=True)
class Jitter:
    short_fwhm: float = DEFAULT_JITTER_FWHM
    drift: float = DEFAULT_DRIFT
    energy_rel: float = DEFAULT_ENERGY_REL

    def __post_init__(self) -> None:
        if min(self.short_fwhm, self.drift, self.energy_rel) < 0:
            raise DomainError("jitter amplitudes must be non-negative")

    @classmethod
    def none(cls) -> "Jitter":
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ShotTruth:
    """Signal model per mass bin: expected counts = rate * transmitted flux.

    Grating strengths follow the pulse energy linearly from their values at
    `nominal_energy`.
    """

    species: tuple[ClusterSpecies, ...]
    rates: tuple[float, ...]
    T: float
    dT_target: float
    ensemble: BeamEnsemble
    fluences: tuple[float, float, float] = (DEFAULT_FLUENCE,) * 3
    nominal_energy: float = DEFAULT_PULSE_ENERGY
    V: float = 1.0
    environment: InertialEnvironment = field(default_factory=InertialEnvironment)
    model: str = "quantum"

    def __post_init__(self) -> None:
        if len(self.species) != len(self.rates):
            raise DomainError("one rate per mass bin required")
        if any(r < 0 for r in self.rates):
            raise DomainError("rates must be non-negative")
        if self.nominal_energy <= 0:
            raise DomainError("nominal pulse energy must be positive")

    def digest(self) -> str:
        blob = json.dumps(self.describe(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()

    def describe(self) -> dict:
        return {
            "species": [asdict(s) for s in self.species],
            "rates": list(self.rates),
            "T": self.T,
            "dT_target": self.dT_target,
            "v0": self.ensemble.v0,
            "sigma_v": self.ensemble.sigma_v,
            "fluences": list(self.fluences),
            "nominal_energy": self.nominal_energy,
            "V": self.V,
            "environment": asdict(self.environment),
            "model": self.model,
        }

    def grating_strengths(self, sp: ClusterSpecies, energies: np.ndarray):
        """(n0, phi0) arrays of shape (3, S) for pulse energies of shape (3, S)."""
        scale = np.asarray(energies, dtype=float) / self.nominal_energy
        n0 = np.array([n0_from_fluence(sp.sigma_abs, F) for F in self.fluences])[:, None] * scale
        phi0 = np.array([phi0_from_polarizability(sp.alpha_vol, F)
                         for F in self.fluences])[:, None] * scale
        return n0, phi0

    def expected_counts(self, T1, T2, energies) -> np.ndarray:
        """Mean counts, shape (bins, S)."""
        T1 = np.atleast_1d(np.asarray(T1, dtype=float))
        T2 = np.atleast_1d(np.asarray(T2, dtype=float))
        energies = np.asarray(energies, dtype=float).reshape(3, -1)
        out = np.empty((len(self.species), T1.size))
        for i, (sp, rate) in enumerate(zip(self.species, self.rates)):
            n0, phi0 = self.grating_strengths(sp, energies)
            try:
                flux = resonant_signal_batch(sp, T1, T2, n0, phi0, self.ensemble, V=self.V,
                                             environment=self.environment, model=self.model)
            except ConfigurationError:
                flux = np.array([self._scalar_flux(sp, T1[j], T2[j], n0[:, j], phi0[:, j])
                                 for j in range(T1.size)])
            out[i] = rate * np.clip(flux, 0.0, None)
        return out

    def _scalar_flux(self, sp, T1, T2, n0, phi0) -> float:
        gratings = [dict(n0=n0[k], phi0=phi0[k], modulation_depth_V=self.V) for k in range(3)]
        seq = PulseSequence.build(T1, T2 - T1, gratings)
        return three_pulse_signal(sp, seq, self.environment, self.ensemble, self.model).total

    def analytic_delta_sn(self, dT_off: float, dT_res: float = 0.0) -> np.ndarray:
        """Engine contrast per bin at nominal energies."""
        e = np.full((3, 2), self.nominal_energy)
        lam = self.expected_counts([self.T, self.T], [self.T + dT_res, self.T + dT_off], e)
        if np.any(lam[:, 1] == 0):
            raise DegenerateReferenceError("off-resonant reference signal vanishes")
        return (lam[:, 0] - lam[:, 1]) / lam[:, 1]


@dataclass(frozen=True)
class ShotRecord:
    shot_id: int
    t1: float
    t2: float
    t3: float
    E1: float
    E2: float
    E3: float
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.t1 < self.t2 < self.t3:
            raise DomainError(f"shot {self.shot_id}: pulse times must increase")
        if min(self.E1, self.E2, self.E3) <= 0:
            raise DomainError(f"shot {self.shot_id}: pulse energies must be positive")
        if any(c < 0 for c in self.counts):
            raise DomainError(f"shot {self.shot_id}: negative counts")

    @property
    def dT(self) -> float:
        return (self.t3 - self.t2) - (self.t2 - self.t1)


@dataclass
class ShotRun:
    """Column-wise shot stream: times (S, 3) in s, energies (S, 3) in J, counts (S, bins)."""

    times: np.ndarray
    energies: np.ndarray
    counts: np.ndarray
    dT_target: float = 0.0
    header: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def dT(self) -> np.ndarray:
        t = self.times
        return (t[:, 2] - t[:, 1]) - (t[:, 1] - t[:, 0])

    def subset(self, mask: np.ndarray) -> "ShotRun":
        return ShotRun(self.times[mask], self.energies[mask], self.counts[mask],
                       self.dT_target, dict(self.header))

    def records(self) -> Iterator[ShotRecord]:
        for i in range(len(self)):
            t, e = self.times[i], self.energies[i]
            yield ShotRecord(i, *map(float, t), *map(float, e),
                             tuple(int(c) for c in self.counts[i]))


def synthesize_shots(truth: ShotTruth, jitter: Jitter = Jitter(), n_shots: int = 10_000,
                     seed: int = 0, t0: float = 0.0) -> ShotRun:
    """Draw a shot stream: jittered timings and energies, then Poisson counts.

    Short-term jitter enters T and dT as independent Gaussians of FWHM
    `short_fwhm`; the long-term drift is one period of a sinusoid on dT over
    the run.  Chunks use child seeds, so output depends only on `seed`.
    """
    if n_shots < 0:
        raise DomainError("n_shots must be non-negative")
    sigma = jitter.short_fwhm / FWHM_PER_SIGMA
    children = np.random.SeedSequence(seed).spawn(max(1, math.ceil(n_shots / CHUNK)))
    times, energies, counts = [], [], []
    for c, start in enumerate(range(0, n_shots, CHUNK)):
        rng = np.random.default_rng(children[c])
        m = min(CHUNK, n_shots - start)
        k = np.arange(start, start + m)
        eps_T = rng.normal(0.0, sigma, m) if sigma else np.zeros(m)
        eps_dT = rng.normal(0.0, sigma, m) if sigma else np.zeros(m)
        drift = jitter.drift * np.sin(2 * np.pi * k / max(n_shots, 1))
        E = truth.nominal_energy * (1 + jitter.energy_rel * rng.standard_normal((3, m)))
        E = np.clip(E, 1e-6 * truth.nominal_energy, None)
        T1 = truth.T + eps_T
        T2 = T1 + truth.dT_target + eps_dT + drift
        lam = truth.expected_counts(T1, T2, E)
        counts.append(rng.poisson(lam).T)
        times.append(np.column_stack([np.full(m, t0), t0 + T1, t0 + T1 + T2]))
        energies.append(E.T)
    n_bins = len(truth.species)
    header = {"schema_version": SCHEMA_VERSION, "seed": int(seed), "truth_digest": truth.digest(),
              "n_shots": int(n_shots), "bins": [s.n_units for s in truth.species],
              "dT_target_ns": truth.dT_target * 1e9,
              "jitter": {"short_fwhm_ns": jitter.short_fwhm * 1e9, "drift_ns": jitter.drift * 1e9,
                         "energy_rel": jitter.energy_rel}}
    return ShotRun(
        np.concatenate(times) if times else np.zeros((0, 3)),
        np.concatenate(energies) if energies else np.zeros((0, 3)),
        np.concatenate(counts) if counts else np.zeros((0, n_bins), dtype=int),
        truth.dT_target,
        header,
    )


@dataclass
class Selection:
    run: ShotRun
    fraction: float


def postselect(run: ShotRun, energy_window: tuple[float, float] | None = None,
               dT_window: float | tuple[float, float] | None = None,
               target: float | None = None) -> Selection:
    """Keep shots whose three energies lie in `energy_window` (J) and whose
    dT - target lies in `dT_window` (s; a scalar w means [-w, w])."""
    keep = np.ones(len(run), dtype=bool)
    if energy_window is not None:
        lo, hi = energy_window
        keep &= np.all((run.energies >= lo) & (run.energies <= hi), axis=1)
    if dT_window is not None:
        lo, hi = (-dT_window, dT_window) if np.isscalar(dT_window) else dT_window
        dev = run.dT - (run.dT_target if target is None else target)
        keep &= (dev >= lo) & (dev <= hi)
    fraction = float(keep.mean()) if len(run) else 0.0
    return Selection(run.subset(keep), fraction)


@dataclass(frozen=True)
class RateEstimate:
    lam: float
    sigma_lam: float
    n_shots: int
    unreliable: bool = False  # lambda above the range where P0 is well sampled


def rate_from_zero_fraction(P0: float, n_shots: int) -> RateEstimate:
    """lambda = -ln P0 with sigma = sqrt(P0 (1 - P0) / n) / P0."""
    if n_shots <= 0:
        raise DomainError("n_shots must be positive")
    if P0 == 0:
        raise SaturatedBinError("no zero-count shots; the estimator is undefined")
    if not 0 < P0 <= 1:
        raise DomainError(f"P0 must lie in (0, 1], got {P0}")
    lam = -math.log(P0)
    sigma = math.sqrt(P0 * (1 - P0) / n_shots) / P0
    return RateEstimate(lam, sigma, n_shots, lam > ZERO_COUNT_LAMBDA_LIMIT)


def rates_per_bin(run: ShotRun) -> list[RateEstimate]:
    """Zero-count estimate for each mass bin independently."""
    n = len(run)
    if n == 0:
        raise DomainError("no shots to analyse")
    zeros = np.sum(run.counts == 0, axis=0)
    return [rate_from_zero_fraction(z / n, n) for z in zeros]


def delta_sn_with_error(S_R: float, S_O: float, dS_R: float, dS_O: float) -> tuple[float, float]:
    if S_O == 0:
        raise DegenerateReferenceError("off-resonant reference signal vanishes")
    if S_O < 0:
        raise DomainError("reference signal must be positive")
    value = (S_R - S_O) / S_O
    err = math.sqrt(dS_R**2 + (S_R / S_O) ** 2 * dS_O**2) / S_O
    return value, err


def analyze_runs(resonant: ShotRun, off_resonant: ShotRun, dT_window: float | None = 5e-9,
                 energy_window: tuple[float, float] | None = None) -> list[dict]:
    """Post-select both runs and return contrast with error per mass bin."""
    res = postselect(resonant, energy_window, dT_window)
    off = postselect(off_resonant, energy_window, dT_window)
    rows = []
    for i, (r, o) in enumerate(zip(rates_per_bin(res.run), rates_per_bin(off.run))):
        value, err = delta_sn_with_error(r.lam, o.lam, r.sigma_lam, o.sigma_lam)
        rows.append({"bin": i, "lam_res": r.lam, "sigma_res": r.sigma_lam, "lam_off": o.lam,
                     "sigma_off": o.sigma_lam, "delta_sn": value, "sigma_delta_sn": err,
                     "n_res": r.n_shots, "n_off": o.n_shots,
                     "unreliable": r.unreliable or o.unreliable})
    return rows


# JSON-lines stream

def write_shots(run: ShotRun, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(run.header, sort_keys=True) + "\n")
        for rec in run.records():
            fh.write(json.dumps({
                "shot_id": rec.shot_id,
                "t_ns": [rec.t1 * 1e9, rec.t2 * 1e9, rec.t3 * 1e9],
                "E_mJ": [rec.E1 * 1e3, rec.E2 * 1e3, rec.E3 * 1e3],
                "counts": list(rec.counts),
            }) + "\n")


def _parse_lines(lines: Iterable[str]) -> tuple[dict, list[dict]]:
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        raise ValueError("empty shot stream") from None
    if header.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported shot schema {header.get('schema_version')!r}")
    return header, [json.loads(line) for line in it if line.strip()]


def read_shots(path: str | Path) -> ShotRun:
    with open(path, encoding="utf-8") as fh:
        header, rows = _parse_lines(fh)
    n_bins = len(header.get("bins", []))
    times = np.array([r["t_ns"] for r in rows], dtype=float).reshape(-1, 3) * 1e-9
    energies = np.array([r["E_mJ"] for r in rows], dtype=float).reshape(-1, 3) * 1e-3
    counts = np.array([r["counts"] for r in rows], dtype=int).reshape(-1, n_bins)
    return ShotRun(times, energies, counts, header.get("dT_target_ns", 0.0) * 1e-9, header)


def mean_dT_bounds(run: ShotRun, jitter: Jitter, sigmas: float = 3.0) -> tuple[float, float]:
    """Realised mean dT minus target, and the allowed 3 sigma / sqrt(n) band."""
    sigma = jitter.short_fwhm / FWHM_PER_SIGMA
    return float(np.mean(run.dT - run.dT_target)), sigmas * sigma / math.sqrt(max(len(run), 1))


def selection_fraction_gaussian(window: float, short_fwhm: float) -> float:
    """Fraction of pure short-term jitter falling in [-window, window]."""
    return math.erf(window / (short_fwhm / FWHM_PER_SIGMA) / math.sqrt(2))


def as_sequence(values: Sequence[float] | float, n: int = 3) -> tuple[float, ...]:
    if np.isscalar(values):
        return (float(values),) * n
    return tuple(float(v) for v in values)
