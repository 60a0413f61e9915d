"""Transmission functions of a pulsed ionization grating and their Fourier kernels.

A pulse with antinode photon number n0, phase amplitude phi0 and modulation
depth V multiplies the wavefunction by

    t(x) = exp[(i phi0 - n0/2) (1 + V cos(G x)) / 2],    G = 2 pi / d.

Harmonic kernels use the convention

    B_n(xi) = sum_m b_m conj(b_{m-n}) exp[i pi xi (n - 2m)]

which is the n-th Fourier coefficient of t(x - xi d/2) conj(t(x + xi d/2)).
It evaluates in closed form to the Fourier coefficients of

    exp[-n0/2 - (V n0/2) cos(pi xi) cos(Gx) + i V phi0 sin(pi xi) sin(Gx)].

The classical (moire) kernel keeps the absorption mask unshifted and
linearises the phase kick: cos(pi xi) -> 1 and sin(pi xi) -> pi xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .bessel import SERIES_RADIUS, bessel_i_orders
from .core import DomainError, GratingPulse

M_MAX_CAP = 256
TAIL_BOUND = 1e-12


class ConvergenceError(RuntimeError):
    """A truncated expansion failed to reach its accuracy target."""


def transmission_amplitude(x, pulse: GratingPulse):
    G = 2 * np.pi / pulse.period_d
    zeta = 1j * pulse.phi0 - pulse.n0 / 2
    return np.exp(zeta * (1 + pulse.modulation_depth_V * np.cos(G * np.asarray(x))) / 2)


def absorption_profile(x, pulse: GratingPulse):
    """Mean absorbed photon number n(x); n0 at antinodes when V = 1."""
    G = 2 * np.pi / pulse.period_d
    return pulse.n0 * (1 + pulse.modulation_depth_V * np.cos(G * np.asarray(x))) / 2


@dataclass(frozen=True)
class CoefficientTable:
    """Fourier data of one grating, indexed from -order_cutoff (b) or -2*order_cutoff (A)."""

    order_cutoff: int
    amplitude_coeffs: np.ndarray
    mask_coeffs: np.ndarray
    n0: float
    phi0: float
    V: float

    def b(self, m: int) -> complex:
        if abs(m) > self.order_cutoff:
            return 0j
        return complex(self.amplitude_coeffs[m + self.order_cutoff])

    def A(self, n: int) -> float:
        k = 2 * self.order_cutoff
        if abs(n) > k:
            return 0.0
        return float(self.mask_coeffs[n + k])


def default_cutoff(n0: float, phi0: float) -> int:
    return max(8, math.ceil(3 * (n0 + abs(phi0))))


def _two_sided(values: np.ndarray) -> np.ndarray:
    """[v_0..v_m] of an even sequence -> [v_m..v_1, v_0, v_1..v_m]."""
    return np.concatenate([values[:0:-1], values])


def amplitude_coefficients(pulse: GratingPulse, m_max: int | None = None) -> CoefficientTable:
    """b_m = exp(zeta/2) I_m(V zeta/2) with zeta = i phi0 - n0/2."""
    if m_max is None:
        m_max = default_cutoff(pulse.n0, pulse.phi0)
    if m_max < 1:
        raise DomainError("m_max must be at least 1")
    zeta = 1j * pulse.phi0 - pulse.n0 / 2
    V = pulse.modulation_depth_V
    while True:
        half = np.exp(zeta / 2) * bessel_i_orders(V * zeta / 2, m_max)
        peak = np.max(np.abs(half))
        if abs(half[-1]) <= TAIL_BOUND * peak:
            break
        if m_max >= M_MAX_CAP:
            raise ConvergenceError(f"amplitude coefficients not converged at m_max={M_MAX_CAP}")
        m_max = min(2 * m_max, M_MAX_CAP)
    return CoefficientTable(
        order_cutoff=m_max,
        amplitude_coeffs=_two_sided(half),
        mask_coeffs=_mask_values(pulse.n0, V, 2 * m_max),
        n0=pulse.n0,
        phi0=pulse.phi0,
        V=V,
    )


def _mask_values(n0: float, V: float, n_max: int) -> np.ndarray:
    half = bessel_i_orders(V * n0 / 2, n_max).real
    half = np.exp(-n0 / 2) * half * (-1.0) ** np.arange(n_max + 1)
    return _two_sided(half)


def mask_coefficients(pulse: GratingPulse, m_max: int | None = None) -> np.ndarray:
    """A_n for |n| <= 2 m_max: Fourier coefficients of |t(x)|^2."""
    return amplitude_coefficients(pulse, m_max).mask_coeffs


def mean_transmission(n0: float, V: float) -> float:
    """A_0 = exp(-n0/2) I_0(V n0/2)."""
    return float(math.exp(-n0 / 2) * bessel_i_orders(V * n0 / 2, 0)[0].real)


def infer_n0_from_transmission(mean_transmission_value: float, V: float = 1.0,
                               tol: float = 1e-12) -> float:
    """Invert A_0(n0) by bisection; A_0 decreases strictly in n0."""
    if not 0.0 < mean_transmission_value <= 1.0:
        raise DomainError("mean transmission must lie in (0, 1]")
    if mean_transmission_value == 1.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while mean_transmission(hi, V) > mean_transmission_value:
        hi *= 2
        if hi > 1e6:
            raise DomainError("transmission too small to invert")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        a_mid = mean_transmission(mid, V)
        if abs(a_mid - mean_transmission_value) < tol:
            return mid
        if a_mid > mean_transmission_value:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _exp_trig_coefficients(P: complex, Q: complex, n_max: int) -> np.ndarray:
    """Fourier coefficients c_{-n_max..n_max} of exp(P cos t + Q sin t)."""
    u = (P - 1j * Q) / 2  # multiplies e^{it}
    w = (P + 1j * Q) / 2  # multiplies e^{-it}
    uw = u * w
    out = np.zeros(2 * n_max + 1, dtype=complex)
    if abs(uw) <= (SERIES_RADIUS / 2) ** 2:
        # c_n = u^n sum_k (uw)^k / (k! (n+k)!),  c_{-n} likewise with w
        for n in range(n_max + 1):
            term = 1.0 / math.factorial(n) + 0j
            total = term
            k = 0
            while True:
                k += 1
                term = term * uw / (k * (n + k))
                total += term
                if (abs(term) <= 1e-17 * abs(total) and k > 2) or k > 400:
                    break
            out[n_max + n] = total * u**n
            out[n_max - n] = total * w**n
        return out
    s = np.sqrt(uw)
    ivals = bessel_i_orders(2 * s, n_max)
    ru, rw = u / s, w / s
    for n in range(n_max + 1):
        out[n_max + n] = ru**n * ivals[n]
        out[n_max - n] = rw**n * ivals[n]
    return out


def kernel_coefficients(n0: float, phi0: float, V: float, cos_factor: float,
                        sin_factor: float, n_max: int) -> np.ndarray:
    """Closed-form kernel with the two Talbot-phase factors given explicitly."""
    P = -(V * n0 / 2) * cos_factor
    Q = 1j * V * phi0 * sin_factor
    return math.exp(-n0 / 2) * _exp_trig_coefficients(P, Q, n_max)


def quantum_factors(xi: float) -> tuple[float, float]:
    return math.cos(math.pi * xi), math.sin(math.pi * xi)


def moire_factors(xi: float) -> tuple[float, float]:
    return 1.0, math.pi * xi


def linearized_talbot_factors(xi: float) -> tuple[float, float]:
    """Only the phase factor linearised; the absorption keeps cos(pi xi)."""
    return math.cos(math.pi * xi), math.pi * xi


CLASSICAL_STRATEGIES: dict[str, Callable[[float], tuple[float, float]]] = {
    "moire": moire_factors,
    "linearized-talbot": linearized_talbot_factors,
}


def _kernel_from_table(table: CoefficientTable, xi: float, n_max: int | None,
                       factors: Callable[[float], tuple[float, float]]) -> np.ndarray:
    if n_max is None:
        n_max = 2 * table.order_cutoff
    c, s = factors(xi)
    return kernel_coefficients(table.n0, table.phi0, table.V, c, s, n_max)


def talbot_coefficients(table: CoefficientTable, xi: float,
                        n_max: int | None = None) -> np.ndarray:
    """Quantum kernel B_n(xi) for |n| <= n_max (default 2 * cutoff)."""
    return _kernel_from_table(table, xi, n_max, quantum_factors)


def classical_coefficients(table: CoefficientTable, xi: float, n_max: int | None = None,
                           strategy: str = "moire") -> np.ndarray:
    """Classical kernel C_n(xi); `strategy` picks the linearisation."""
    try:
        factors = CLASSICAL_STRATEGIES[strategy]
    except KeyError:
        raise ValueError(f"unknown classical strategy {strategy!r}") from None
    return _kernel_from_table(table, xi, n_max, factors)


def talbot_coefficients_by_sum(table: CoefficientTable, xi: float) -> np.ndarray:
    """Direct double sum over amplitude coefficients (reference path)."""
    m = table.order_cutoff
    b = table.amplitude_coeffs
    idx = np.arange(-m, m + 1)
    n_max = 2 * m
    out = np.zeros(2 * n_max + 1, dtype=complex)
    for n in range(-n_max, n_max + 1):
        shifted = idx - n
        ok = np.abs(shifted) <= m
        terms = b[ok] * np.conj(b[shifted[ok] + m]) * np.exp(1j * np.pi * xi * (n - 2 * idx[ok]))
        out[n + n_max] = terms.sum()
    return out


def kernel_at(n0, phi0, V, xi, n, model: str = "quantum",
              strategy: str = "moire") -> np.ndarray:
    """Single kernel coefficients K_n(xi); all arguments broadcast together."""
    n0, phi0, V, xi, n = np.broadcast_arrays(
        np.asarray(n0, dtype=float), np.asarray(phi0, dtype=float),
        np.asarray(V, dtype=float), np.asarray(xi, dtype=float), np.asarray(n, dtype=int))
    shape = xi.shape
    n0, phi0, V, xi, n = (a.ravel() for a in (n0, phi0, V, xi, n))
    if model == "quantum":
        cf, sf = np.cos(np.pi * xi), np.sin(np.pi * xi)
    elif model == "classical":
        if strategy == "moire":
            cf, sf = np.ones_like(xi), np.pi * xi
        elif strategy == "linearized-talbot":
            cf, sf = np.cos(np.pi * xi), np.pi * xi
        else:
            raise ValueError(f"unknown classical strategy {strategy!r}")
    else:
        raise ValueError(f"unknown model {model!r}")
    P = -(V * n0 / 2) * cf
    Q = 1j * V * phi0 * sf
    u = (P - 1j * Q) / 2
    w = (P + 1j * Q) / 2
    uw = u * w
    k = np.abs(n)
    base = np.where(n >= 0, u, w)
    out = np.empty(xi.shape, dtype=complex)
    small = np.abs(uw) <= (SERIES_RADIUS / 2) ** 2
    if np.any(small):
        kk = k[small]
        bs = base[small]
        lead = np.ones(kk.shape, dtype=complex)
        lead[(kk > 0) & (bs == 0)] = 0.0
        nz = (kk > 0) & (bs != 0)
        lead[nz] = np.exp(kk[nz] * np.log(bs[nz]) - gammaln(kk[nz] + 1.0))
        total = np.ones(kk.shape, dtype=complex)
        term = np.ones(kk.shape, dtype=complex)
        x = uw[small]
        for j in range(1, 120):
            term = term * x / (j * (kk + j))
            total = total + term
            if j > 2 and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[small] = lead * total
    for idx in np.flatnonzero(~small):
        s = np.sqrt(uw[idx])
        ival = bessel_i_orders(2 * s, int(k[idx]))[-1]
        out[idx] = (base[idx] / s) ** k[idx] * ival
    return (np.exp(-n0 / 2) * out).reshape(shape)
