"""Brute-force references: grid wave propagation and classical trajectories."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CONSTANTS, ClusterSpecies, PulseSequence, talbot_time
from .gratings import absorption_profile, transmission_amplitude

MIN_MC_SAMPLES = 10_000


class OracleRefusal(ValueError):
    pass


@dataclass
class GridState:
    samples: np.ndarray
    period: float
    mass: float

    def __post_init__(self) -> None:
        M = len(self.samples)
        if M & (M - 1):
            raise ValueError("grid length must be a power of two")

    @property
    def x(self) -> np.ndarray:
        return self.period * np.arange(len(self.samples)) / len(self.samples)

    @property
    def norm(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))

    def evolve(self, t: float, velocity: float = 0.0) -> "GridState":
        """Free evolution of the periodic Bloch factor of a state with transverse velocity."""
        M = len(self.samples)
        j = np.fft.fftfreq(M, 1.0 / M)
        G = 2 * np.pi / self.period
        Tm = talbot_time(self.mass, self.period)
        # exp(-i hbar (jG + k0)^2 t / 2m) without the global k0^2 term
        phase = np.pi * j**2 * t / Tm + j * G * velocity * t
        coeffs = np.fft.fft(self.samples) * np.exp(-1j * phase)
        return GridState(np.fft.ifft(coeffs), self.period, self.mass)

    def high_order_power(self) -> float:
        """Fraction of power in momentum orders at or above M/4."""
        M = len(self.samples)
        c = np.fft.fft(self.samples) / M
        j = np.abs(np.fft.fftfreq(M, 1.0 / M))
        p = np.abs(c) ** 2
        return float(p[j >= M // 4].sum() / p.sum()) if p.sum() else 0.0


def _shifted(pulse, x, offset):
    return transmission_amplitude(x - offset, pulse)


def _single_class(sequence: PulseSequence, species: ClusterSpecies, velocity: float,
                  M: int, offsets) -> tuple[float, float]:
    g1, g2, g3 = sequence.pulses
    T1, T2 = sequence.delays
    d = g1.period_d
    state = GridState(np.ones(M, dtype=complex), d, species.mass)
    x = state.x
    state = GridState(state.samples * _shifted(g1, x, offsets[0]), d, species.mass)
    state = state.evolve(T1, velocity)
    alias = state.high_order_power()
    state = GridState(state.samples * _shifted(g2, x, offsets[1]), d, species.mass)
    state = state.evolve(T2, velocity)
    alias = max(alias, state.high_order_power())
    density = np.abs(state.samples) ** 2
    mask = np.abs(_shifted(g3, x, offsets[2])) ** 2
    return float(np.mean(density * mask)), alias


def grid_quantum_oracle(sequence: PulseSequence, species: ClusterSpecies, transverse,
                        n_classes: int = 16, M: int = 512,
                        offsets=(0.0, 0.0, 0.0), alias_tol: float = 1e-20) -> float:
    """Transmitted flux by explicit propagation on one grating period.

    Each momentum class is a plane wave whose periodic factor is propagated
    through the three pulses; the classes are averaged incoherently.
    """
    velocities = transverse.quantile_classes(n_classes)
    while True:
        fluxes, worst = [], 0.0
        for v in velocities:
            f, alias = _single_class(sequence, species, float(v), M, offsets)
            fluxes.append(f)
            worst = max(worst, alias)
        if worst <= alias_tol or M >= 1 << 16:
            return float(np.mean(fluxes))
        M *= 2


@dataclass
class MCResult:
    flux: float
    stderr: float
    n_samples: int
    survivors: int


def classical_mc_oracle(sequence: PulseSequence, species: ClusterSpecies, transverse,
                        n_samples: int = 1_000_000, seed: int = 0,
                        acceleration: float = 0.0, offsets=(0.0, 0.0, 0.0),
                        batch: int = 250_000) -> MCResult:
    """Classical trajectories with stochastic removal and dipole kicks."""
    if n_samples < MIN_MC_SAMPLES:
        raise OracleRefusal(f"need at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    g = sequence.pulses
    d = g[0].period_d
    G = 2 * np.pi / d
    mass = species.mass * CONSTANTS.amu
    eta = species.ionization_yield
    times = [p.fire_time - g[0].fire_time for p in g]
    seeds = np.random.SeedSequence(seed).spawn(math.ceil(n_samples / batch))
    survivors = 0
    done = 0
    for ss in seeds:
        n = min(batch, n_samples - done)
        rng = np.random.default_rng(ss)
        x = rng.uniform(0.0, d, size=n)
        v = transverse.sample(n, rng)
        alive = np.ones(n, dtype=bool)
        t_prev = 0.0
        for k, pulse in enumerate(g):
            dt = times[k] - t_prev
            x = x + v * dt + 0.5 * acceleration * dt**2
            v = v + acceleration * dt
            t_prev = times[k]
            xr = x - offsets[k]
            p_remove = 1 - np.exp(-eta * absorption_profile(xr, pulse))
            alive &= rng.uniform(size=n) >= p_remove
            kick = -CONSTANTS.hbar * pulse.phi0 * pulse.modulation_depth_V * G / 2 * np.sin(G * xr)
            v = v + kick / mass
        survivors += int(alive.sum())
        done += n
    p = survivors / n_samples
    return MCResult(p, math.sqrt(max(p * (1 - p), 1.0 / n_samples) / n_samples), n_samples, survivors)


# pinning suites shared by the CLI and the tests

QUANTUM_GRID = {
    "n0": (0.0, 0.5, 2.0, 4.0),
    "phi0": (0.0, 1.0, 3.0),
    "xi": (0.1, 0.5, 1.0),
    "dT": (0.0, 50e-9, 200e-9),
}
CLASSICAL_SETTINGS = (
    # n0, phi0, xi, dT
    (2.0, 1.0, 1.0, 0.0),
    (2.0, 1.0, 0.5, 0.0),
    (4.0, 3.0, 1.0, 0.0),
    (0.5, 3.0, 0.3, 0.0),
    (2.0, 1.0, 1.0, 20e-9),
    (2.0, 0.0, 1.0, 0.0),
)
QUANTUM_REL_TOL = 1e-6
CLASSICAL_SIGMAS = 3.0
ORACLE_SPECIES = ClusterSpecies(7, 1247.6, 0.0, 0.0)
ORACLE_SIGMA_V = 0.62


@dataclass
class OracleRow:
    kind: str
    n0: float
    phi0: float
    xi: float
    dT: float
    engine: float
    oracle: float
    error: float  # relative error (quantum) or deviation in standard errors (classical)
    passed: bool


def quantum_oracle_suite(n_classes: int = 16, M: int = 512, grid: dict | None = None,
                         species: ClusterSpecies = ORACLE_SPECIES,
                         sigma_v: float = ORACLE_SIGMA_V) -> list[OracleRow]:
    """Engine against grid propagation, the engine seeing the same velocity classes."""
    from .engine import three_pulse_signal
    from .ensemble import BeamEnsemble, GaussianDist, as_discrete

    grid = QUANTUM_GRID if grid is None else grid
    gauss = GaussianDist(0.0, sigma_v)
    ens = BeamEnsemble(925.0, transverse=as_discrete(gauss.quantile_classes(n_classes)))
    Tm = talbot_time(species.mass)
    rows = []
    for n0 in grid["n0"]:
        for phi0 in grid["phi0"]:
            for xi in grid["xi"]:
                for dT in grid["dT"]:
                    seq = PulseSequence.build(xi * Tm, dT, dict(n0=n0, phi0=phi0))
                    e = three_pulse_signal(species, seq, ensemble=ens).total
                    o = grid_quantum_oracle(seq, species, gauss, n_classes, M)
                    err = abs(e - o) / abs(o)
                    rows.append(OracleRow("quantum", n0, phi0, xi, dT, e, o, err,
                                          err <= QUANTUM_REL_TOL))
    return rows


def classical_oracle_suite(n_samples: int = 1_000_000, seed: int = 0, settings=CLASSICAL_SETTINGS,
                           species: ClusterSpecies = ORACLE_SPECIES,
                           sigma_v: float = ORACLE_SIGMA_V,
                           strategy: str = "moire") -> list[OracleRow]:
    from .engine import three_pulse_signal
    from .ensemble import BeamEnsemble, GaussianDist

    gauss = GaussianDist(0.0, sigma_v)
    ens = BeamEnsemble(925.0, transverse=gauss)
    Tm = talbot_time(species.mass)
    rows = []
    for i, (n0, phi0, xi, dT) in enumerate(settings):
        seq = PulseSequence.build(xi * Tm, dT, dict(n0=n0, phi0=phi0))
        e = three_pulse_signal(species, seq, ensemble=ens, model="classical",
                               classical_strategy=strategy).total
        mc = classical_mc_oracle(seq, species, gauss, n_samples, seed=seed + i)
        z = abs(e - mc.flux) / mc.stderr
        rows.append(OracleRow("classical", n0, phi0, xi, dT, e, mc.flux, z, z <= CLASSICAL_SIGMAS))
    return rows
