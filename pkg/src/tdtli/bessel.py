"""Modified Bessel functions of the first kind, integer order, complex argument.

Ascending series for |z| <= 8, Miller backward recurrence above.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

SERIES_RADIUS = 8.0
_RESCALE = 1e250


def _series(z: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    q = z * z / 4.0
    with np.errstate(under="ignore"):
        lead = np.exp(n * np.log(z / 2.0) - gammaln(n + 1.0))  # (z/2)^n / n!
    term = np.ones(n_max + 1, dtype=complex)
    total = term.copy()
    for k in range(1, 200):
        term = term * q / (k * (n + k))
        total += term
        if k > 2 and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return lead * total


def _backward(z: complex, n_max: int) -> np.ndarray:
    r = abs(z)
    start = int(max(n_max, r) + 20 + 2 * math.sqrt(40 * max(n_max, r)))
    start += start % 2
    vals = np.zeros(start + 2, dtype=complex)
    vals[start] = 1e-300
    two_over_z = 2.0 / z
    for k in range(start, 0, -1):
        vals[k - 1] = vals[k + 1] + k * two_over_z * vals[k]
        if abs(vals[k - 1]) > _RESCALE:
            vals[k - 1 :] /= _RESCALE
    # normalise with whichever generating identity does not cancel
    signs = np.ones(start + 1)
    if z.real >= 0:
        ref = np.exp(z)
    else:
        ref = np.exp(-z)
        signs[1::2] = -1.0
    norm = vals[0] + 2.0 * np.sum(signs[1:] * vals[1 : start + 1])
    return vals[: n_max + 1] * (ref / norm)


def bessel_i_orders(z: complex, n_max: int) -> np.ndarray:
    """Return [I_0(z), ..., I_{n_max}(z)] for a scalar complex z."""
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    z = complex(z)
    if z / 2.0 == 0:
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = 1.0
        return out
    if abs(z) <= SERIES_RADIUS:
        return _series(z, n_max)
    return _backward(z, n_max)


def bessel_i(n: int, z: complex) -> complex:
    """Single value I_n(z); negative orders use I_{-n} = I_n."""
    n = abs(int(n))
    return complex(bessel_i_orders(z, n)[n])


def bessel_i_integral(n: int, z: complex, nodes: int = 4096) -> complex:
    """Reference value from (1/pi) int_0^pi exp(z cos t) cos(n t) dt.

    Trapezoid rule on a periodic integrand; converges geometrically.
    """
    t = np.linspace(0.0, 2 * np.pi, nodes, endpoint=False)
    return complex(np.mean(np.exp(z * np.cos(t)) * np.cos(n * t)))
