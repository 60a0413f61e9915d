"""Gaussian and damped-sine fits: coarse grid seed, then bounded least squares."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
MIN_POINTS = 8
MAX_EVALUATIONS = 2000


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    params: dict[str, float]
    residual_norm: float
    converged: bool
    message: str = ""
    n_points: int = 0
    extras: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> float:
        return self.params[key]


def gaussian(x, center, fwhm, amplitude, offset):
    sigma = fwhm / FWHM_PER_SIGMA
    return amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2) + offset


def damped_sine(x, period, phase, decay, amplitude, offset):
    """amplitude * exp(-x / decay) * cos(2 pi x / period + phase) + offset."""
    return amplitude * np.exp(-x / decay) * np.cos(2 * np.pi * x / period + phase) + offset


def _prepare(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y differ in shape")
    if len(x) < MIN_POINTS:
        raise FitError(f"need at least {MIN_POINTS} points, got {len(x)}")
    order = np.argsort(x)
    return x[order], y[order]


def _refine(model, p0, x, y, lower, upper, names) -> FitResult:
    def residual(p):
        return model(x, *p) - y

    try:
        sol = least_squares(residual, p0, bounds=(lower, upper), method="trf",
                            x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=MAX_EVALUATIONS)
    except (ValueError, FloatingPointError) as exc:
        r = residual(p0)
        return FitResult(dict(zip(names, map(float, p0))), float(np.linalg.norm(r)), False,
                         str(exc), len(x))
    converged = bool(sol.success) and sol.status > 0
    return FitResult(dict(zip(names, map(float, sol.x))), float(np.linalg.norm(sol.fun)),
                     converged, sol.message, len(x))


def fit_gaussian(x, y) -> FitResult:
    """Fit amplitude * exp(-(x - c)^2 / 2 s^2) + offset; returns FWHM, not s."""
    x, y = _prepare(x, y)
    span = x[-1] - x[0]
    step = np.min(np.diff(x)) if len(x) > 1 else span
    offset0 = float(np.median(np.concatenate([y[:2], y[-2:]])))
    dev = y - offset0
    peak = int(np.argmax(np.abs(dev)))
    amp0 = float(dev[peak])
    best = None
    # coarse grid over centre and width
    for c in np.linspace(x[0], x[-1], 41):
        for w in np.geomspace(max(step, span / 200), span, 30):
            basis = gaussian(x, c, w, 1.0, 0.0)
            A = np.vstack([basis, np.ones_like(x)]).T
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            r = float(np.sum((A @ coef - y) ** 2))
            if best is None or r < best[0]:
                best = (r, c, w, coef[0], coef[1])
    if best is None or best[3] == 0:
        best = (0.0, x[peak], span / 4, amp0, offset0)
    _, c0, w0, a0, o0 = best
    lower = [x[0] - span, step / 10, -np.inf, -np.inf]
    upper = [x[-1] + span, 10 * span, np.inf, np.inf]
    return _refine(gaussian, [c0, w0, a0, o0], x, y, lower, upper,
                   ["center", "fwhm", "amplitude", "offset"])


def fit_damped_sine(x, y) -> FitResult:
    x, y = _prepare(x, y)
    span = x[-1] - x[0]
    step = np.min(np.diff(x))
    best = None
    periods = np.geomspace(2.5 * step, 3 * span, 120)
    decays = np.concatenate([np.geomspace(span / 10, 100 * span, 12), [1e6 * span]])
    for P in periods:
        for tau in decays:
            env = np.exp(-(x - x[0]) / tau)
            A = np.vstack([env * np.cos(2 * np.pi * x / P), env * np.sin(2 * np.pi * x / P),
                           np.ones_like(x)]).T
            coef, *_ = np.linalg.lstsq(A, y, rcond=None)
            r = float(np.sum((A @ coef - y) ** 2))
            if best is None or r < best[0]:
                best = (r, P, tau, coef)
    _, P0, tau0, (c, s, o0) = best
    amp0 = math.hypot(c, s) * math.exp(x[0] / tau0)
    phase0 = math.atan2(-s, c)
    if amp0 == 0:
        amp0 = float(np.std(y)) or 1.0
    lower = [2 * step, -np.inf, span / 1000, 0.0, -np.inf]
    upper = [10 * span, np.inf, np.inf, np.inf, np.inf]
    res = _refine(damped_sine, [P0, phase0, tau0, amp0, o0], x, y, lower, upper,
                  ["period", "phase", "decay", "amplitude", "offset"])
    res.params["phase"] = float((res.params["phase"] + np.pi) % (2 * np.pi) - np.pi)
    return res
