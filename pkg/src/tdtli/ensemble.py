"""Statistical model of the pulsed cluster beam."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import ndtri

from .core import GRATING_PERIOD, talbot_time

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))

SEED_GAS_SPEED = {"argon": 690.0, "neon": 925.0}
DEFAULT_REL_SPREAD = 0.03
DEFAULT_DIVERGENCE = 2.1e-3
MIN_MIRROR_DISTANCE = 0.05e-3

# how a quoted divergence angle maps onto the transverse-velocity sigma
DIVERGENCE_DEFINITIONS = {
    "std": 1.0,
    "hwhm": 1.0 / (FWHM_PER_SIGMA / 2),
    "fwhm": 1.0 / FWHM_PER_SIGMA,
}


class ConfigurationError(ValueError):
    pass


def divergence_to_sigma_v(divergence: float, v0: float, definition: str = "std") -> float:
    try:
        return divergence * v0 * DIVERGENCE_DEFINITIONS[definition]
    except KeyError:
        raise ConfigurationError(f"unknown divergence definition {definition!r}") from None


def sigma_v_to_divergences(sigma_v: float, v0: float) -> dict[str, float]:
    """The divergence angle a given sigma_v corresponds to under each convention."""
    return {name: sigma_v / (v0 * k) for name, k in DIVERGENCE_DEFINITIONS.items()}


@dataclass(frozen=True)
class GaussianDist:
    mean: float
    sigma: float

    def characteristic(self, q):
        q = np.asarray(q, dtype=float)
        return np.exp(1j * q * self.mean - 0.5 * (q * self.sigma) ** 2)

    def quadrature(self, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
        if n_nodes < 3:
            raise ConfigurationError("quadrature needs at least 3 nodes")
        x, w = hermgauss(n_nodes)
        return self.mean + math.sqrt(2) * self.sigma * x, w / math.sqrt(math.pi)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(self.mean, self.sigma, size=n)

    def quantile_classes(self, n: int) -> np.ndarray:
        """n equally weighted values at the mid-quantiles (stratified)."""
        p = (np.arange(n) + 0.5) / n
        return self.mean + self.sigma * ndtri(p)

    @property
    def std(self) -> float:
        return self.sigma


@dataclass(frozen=True)
class DiscreteDist:
    values: tuple[float, ...]
    weights: tuple[float, ...] | None = None

    def _w(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.values), 1.0 / len(self.values))
        w = np.asarray(self.weights, dtype=float)
        return w / w.sum()

    @property
    def mean(self) -> float:
        return float(np.dot(self._w(), self.values))

    @property
    def std(self) -> float:
        v = np.asarray(self.values)
        return float(np.sqrt(np.dot(self._w(), (v - self.mean) ** 2)))

    def characteristic(self, q):
        q = np.asarray(q, dtype=float)
        v = np.asarray(self.values)
        return np.tensordot(np.exp(1j * np.multiply.outer(q, v)), self._w(), axes=([-1], [0]))

    def quadrature(self, n_nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.values, dtype=float), self._w()

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(np.asarray(self.values), size=n, p=self._w())

    def quantile_classes(self, n: int) -> np.ndarray:
        if n != len(self.values) or self.weights is not None:
            raise ConfigurationError("discrete distribution only yields its own equal-weight classes")
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class TabulatedDist:
    """Arbitrary density on a grid; moments and characteristic function by quadrature."""

    grid: tuple[float, ...]
    density: tuple[float, ...]

    def _weights(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(self.grid, dtype=float)
        p = np.asarray(self.density, dtype=float)
        dx = np.gradient(x)
        w = p * dx
        return x, w / w.sum()

    @property
    def mean(self) -> float:
        x, w = self._weights()
        return float(np.dot(w, x))

    @property
    def std(self) -> float:
        x, w = self._weights()
        return float(np.sqrt(np.dot(w, (x - np.dot(w, x)) ** 2)))

    def characteristic(self, q):
        x, w = self._weights()
        q = np.asarray(q, dtype=float)
        return np.tensordot(np.exp(1j * np.multiply.outer(q, x)), w, axes=([-1], [0]))

    def quadrature(self, n_nodes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        return self._weights()

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        x, w = self._weights()
        cdf = np.cumsum(w)
        return np.interp(rng.uniform(size=n), cdf, x)

    def quantile_classes(self, n: int) -> np.ndarray:
        x, w = self._weights()
        cdf = np.cumsum(w) - 0.5 * w
        return np.interp((np.arange(n) + 0.5) / n, cdf, x)


@dataclass(frozen=True)
class BeamEnsemble:
    """Forward speed, transverse velocity and mirror-distance distributions."""

    v0: float
    rel_spread: float = DEFAULT_REL_SPREAD
    transverse: GaussianDist | DiscreteDist | TabulatedDist = field(
        default_factory=lambda: GaussianDist(0.0, DEFAULT_DIVERGENCE * 925.0))
    height_mean: float = 1.5e-3
    height_sigma: float = 0.0
    divergence: float | None = None
    divergence_definition: str = "std"

    @property
    def forward(self) -> GaussianDist:
        # the relative spread is read as a FWHM
        return GaussianDist(self.v0, self.rel_spread * self.v0 / FWHM_PER_SIGMA)

    @property
    def sigma_v(self) -> float:
        return self.transverse.std

    def characteristic(self, q):
        return self.transverse.characteristic(q)

    def with_sigma_v(self, sigma_v: float) -> "BeamEnsemble":
        return replace(self, transverse=GaussianDist(0.0, sigma_v), divergence=None)

    def with_transverse(self, dist) -> "BeamEnsemble":
        return replace(self, transverse=dist, divergence=None)

    def height_samples(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Mirror distances, Gaussian truncated so the beam clears the mirror."""
        if self.height_sigma == 0:
            return np.full(n, self.height_mean)
        out = np.empty(0)
        while out.size < n:
            z = rng.normal(self.height_mean, self.height_sigma, size=2 * n)
            out = np.concatenate([out, z[z >= MIN_MIRROR_DISTANCE]])
        return out[:n]


def seeded_beam(gas: str = "neon", *, v0: float | None = None, rel_spread: float | None = None,
                divergence: float | None = None, divergence_definition: str = "std",
                sigma_v: float | None = None, height_mean: float = 1.5e-3,
                height_sigma: float = 0.0) -> BeamEnsemble:
    """Experiment-like beam for a seed gas; keyword overrides replace defaults verbatim."""
    gas = gas.lower()
    if gas not in SEED_GAS_SPEED:
        raise ConfigurationError(f"unknown seed gas {gas!r}; expected argon or neon")
    v0 = SEED_GAS_SPEED[gas] if v0 is None else v0
    rel_spread = DEFAULT_REL_SPREAD if rel_spread is None else rel_spread
    if sigma_v is None:
        divergence = DEFAULT_DIVERGENCE if divergence is None else divergence
        sigma_v = divergence_to_sigma_v(divergence, v0, divergence_definition)
    return BeamEnsemble(
        v0=v0,
        rel_spread=rel_spread,
        transverse=GaussianDist(0.0, sigma_v),
        height_mean=height_mean,
        height_sigma=height_sigma,
        divergence=divergence,
        divergence_definition=divergence_definition,
    )


def quadrature(dist, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    return dist.quadrature(n_nodes)


def sample(dist, n: int, seed: int) -> np.ndarray:
    return dist.sample(n, np.random.default_rng(seed))


def velocity_timing_consistency(T: float, period_d: float = GRATING_PERIOD) -> float:
    """Mass in amu whose Talbot time equals the pulse separation T."""
    return T / talbot_time(1.0, period_d)


def quadrature_characteristic(dist, q, n_nodes: int = 64) -> np.ndarray:
    nodes, weights = dist.quadrature(n_nodes)
    q = np.asarray(q, dtype=float)
    return np.exp(1j * np.multiply.outer(q, nodes)) @ weights


def as_discrete(values: Sequence[float]) -> DiscreteDist:
    return DiscreteDist(tuple(float(v) for v in values))
