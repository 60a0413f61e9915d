"""Three-pulse signal, contrast observable, phase levers and scans.

For a transverse plane wave of velocity v the periodic part of the state
evolves as for v = 0 with the gratings displaced by -v t (Galilean boost).
Expanding all three gratings in harmonics, the transmitted flux becomes

    S = sum_{a,b} K1_a(a e1 + h e2) K2_b(h e2) A3_{-h}
                  chi(-G (a (T1 + T2) + b T2)) exp[-i G (a x1 + b x2 - h x3)]

with h = a + b, e_k = T_k / T_m, chi the characteristic function of the
transverse velocity, x_k the grating offsets and K the quantum (B) or
classical (C) kernels.  For a broad velocity distribution only the resonant
terms b = -2a survive; at a balanced sequence these reduce to
A1_n K2_{-2n}(-n T/T_m) A3_n washed out by chi(n G dT).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core import (
    ClusterSpecies,
    DomainError,
    GratingPulse,
    PulseSequence,
    n0_from_fluence,
    phi0_from_polarizability,
    talbot_time,
)
from .ensemble import BeamEnsemble, ConfigurationError
from .gratings import amplitude_coefficients, kernel_at, mean_transmission
from .results import ScanResult

DEFAULT_OFF_RESONANCE = 200e-9
# terms whose ensemble weight falls below this are dropped
WEIGHT_FLOOR = 1e-300


class DegenerateReferenceError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class InertialEnvironment:
    acceleration_along_grating: float = 0.0
    grating_offsets: tuple[float, float, float] = (0.0, 0.0, 0.0)
    mirror_distance: float = 1.5e-3
    beam_height_spread: float = 0.0
    coherence_decay_length: float | None = None

    def __post_init__(self) -> None:
        if self.mirror_distance < 0 or self.beam_height_spread < 0:
            raise DomainError("mirror distance and height spread must be non-negative")


@dataclass
class SignalBreakdown:
    harmonics: dict[int, complex]
    total: float
    coherent: float
    background: float
    model: str
    species: ClusterSpecies
    sequence: PulseSequence
    metadata: dict = field(default_factory=dict)

    def s(self, n: int) -> complex:
        return self.harmonics.get(n, 0j)

    @property
    def fringe_weight(self) -> float:
        return float(sum(abs(v) for k, v in self.harmonics.items() if k != 0))


def acceleration_offsets(a: float, T1: float, T2: float) -> tuple[float, float, float]:
    """Grating displacements equivalent to a uniform acceleration of the particles."""
    return 0.0, -0.5 * a * T1**2, -0.5 * a * (T1 + T2) ** 2


def acceleration_phase(a: float, sequence: PulseSequence | tuple[float, float],
                       period_d: float | None = None) -> tuple[float, float]:
    """Fringe shift (m) and first-harmonic phase (rad) from a constant acceleration.

    Equals a T^2 for a balanced sequence; no velocity enters.
    """
    if isinstance(sequence, PulseSequence):
        T1, T2 = sequence.delays
        period_d = sequence.g2.period_d if period_d is None else period_d
    else:
        T1, T2 = sequence
    if period_d is None:
        raise DomainError("grating period required")
    x1, x2, x3 = acceleration_offsets(a, T1, T2)
    shift = -(x1 - 2 * x2 + x3)
    return shift, 2 * math.pi / period_d * shift


def tilt_phase(z_m: float, theta: float, period_d: float | None = None) -> float | tuple[float, float]:
    """Fringe shift 2 z_m (1 - cos theta) ~ z_m theta^2 from tilting the middle beam.

    With `period_d` also returns the first-harmonic phase.
    """
    shift = 2 * z_m * (1 - math.cos(theta))
    if period_d is None:
        return shift
    return shift, 2 * math.pi / period_d * shift


def three_pulse_signal(
    species: ClusterSpecies,
    sequence: PulseSequence,
    environment: InertialEnvironment | None = None,
    ensemble: BeamEnsemble | None = None,
    model: str = "quantum",
    classical_strategy: str = "moire",
) -> SignalBreakdown:
    """Normalised transmitted flux through three pulsed ionization gratings."""
    if ensemble is None or not hasattr(ensemble, "characteristic"):
        raise ConfigurationError("ensemble must provide a transverse characteristic function")
    if model not in ("quantum", "classical"):
        raise ValueError(f"unknown model {model!r}")
    env = environment or InertialEnvironment()
    g1, g2, g3 = sequence.pulses
    d = g1.period_d
    if not (g2.period_d == d and g3.period_d == d):
        raise DomainError("all pulses must share one grating period")
    G = 2 * math.pi / d
    T1, T2 = sequence.delays
    Tm = talbot_time(species.mass, d)
    e1, e2 = T1 / Tm, T2 / Tm

    tables = [amplitude_coefficients(g) for g in (g1, g2, g3)]
    N1, N2, N3 = (2 * t.order_cutoff for t in tables)

    a = np.arange(-N1, N1 + 1)[:, None]
    b = np.arange(-N2, N2 + 1)[None, :]
    a, b = np.broadcast_arrays(a, b)
    h = a + b
    valid = np.abs(h) <= N3

    z = env.mirror_distance
    ax = acceleration_offsets(env.acceleration_along_grating, T1, T2)
    x = [env.grating_offsets[k] + ax[k] for k in range(3)]
    # a tilted beam moves its nodes by -z (1 - cos theta) at mirror distance z
    c = [1 - math.cos(g.tilt_theta) for g in (g1, g2, g3)]
    tilt_arm = -(a * c[0] + b * c[1] - h * c[2])
    lever = a * x[0] + b * x[1] - h * x[2] + z * tilt_arm

    q = -G * (a * (T1 + T2) + b * T2)
    weight = np.asarray(ensemble.characteristic(q), dtype=complex) * np.exp(-1j * G * lever)
    if env.beam_height_spread:
        weight = weight * np.exp(-0.5 * (G * env.beam_height_spread * tilt_arm) ** 2)
    if env.coherence_decay_length:
        fringe = (a != 0) | (b != 0)
        weight = np.where(fringe, weight * math.exp(-z / env.coherence_decay_length), weight)
    keep = valid & (np.abs(weight) > WEIGHT_FLOOR)

    ak, bk, hk, wk = a[keep], b[keep], h[keep], weight[keep]
    k1 = kernel_at(g1.n0, g1.phi0, g1.modulation_depth_V, ak * e1 + hk * e2, ak, model,
                   classical_strategy)
    k2 = kernel_at(g2.n0, g2.phi0, g2.modulation_depth_V, hk * e2, bk, model,
                   classical_strategy)
    a3 = tables[2].mask_coeffs[-hk + N3]
    terms = k1 * k2 * a3 * wk

    harmonics: dict[int, complex] = {}
    for n, t in zip(ak.tolist(), terms):
        harmonics[n] = harmonics.get(n, 0j) + t
    coherent = float(sum(harmonics.values()).real)

    eta = species.ionization_yield
    background = 0.0
    if eta < 1.0:
        survive = np.prod([mean_transmission(eta * g.n0, g.modulation_depth_V) for g in (g1, g2, g3)])
        absorb_free = np.prod([mean_transmission(g.n0, g.modulation_depth_V) for g in (g1, g2, g3)])
        background = float(survive - absorb_free)
    total = coherent + background
    return SignalBreakdown(
        harmonics=harmonics,
        total=total,
        coherent=coherent,
        background=background,
        model=model,
        species=species,
        sequence=sequence,
        metadata={"talbot_time": Tm, "xi": T1 / Tm, "terms": int(keep.sum())},
    )


DEFAULT_FLUENCE = 10.0  # J/m^2 incident per pulse


def species_sequence(
    species: ClusterSpecies,
    T: float,
    dT: float = 0.0,
    fluences: float | Sequence[float] = DEFAULT_FLUENCE,
    V: float = 1.0,
    tilts: Sequence[float] = (0.0, 0.0, 0.0),
    n0: Sequence[float] | None = None,
    phi0: Sequence[float] | None = None,
    alpha_scale: float = 1.0,
) -> PulseSequence:
    """Pulse sequence with grating strengths derived for one species.

    `n0` / `phi0` bypass the fluence route (e.g. n0 measured from the loss
    rate); `alpha_scale` rescales the polarizability for sensitivity bands.
    """
    if np.isscalar(fluences):
        fluences = [float(fluences)] * 3
    gratings = []
    for k in range(3):
        F = fluences[k]
        g_n0 = n0[k] if n0 is not None else n0_from_fluence(species.sigma_abs, F)
        if phi0 is not None:
            g_phi = phi0[k] * alpha_scale
        else:
            g_phi = phi0_from_polarizability(species.alpha_vol * alpha_scale, F)
        gratings.append(dict(n0=g_n0, phi0=g_phi, modulation_depth_V=V, tilt_theta=tilts[k]))
    return PulseSequence.build(T, dT, gratings)


def delta_sn(
    species: ClusterSpecies,
    sequence: PulseSequence,
    environment: InertialEnvironment | None = None,
    ensemble: BeamEnsemble | None = None,
    model: str = "quantum",
    dT_off: float = DEFAULT_OFF_RESONANCE,
    dT_res: float = 0.0,
    classical_strategy: str = "moire",
) -> float:
    """(S_R - S_O) / S_O with S_R at dT_res (balanced by default) and S_O at dT_off."""
    kw = dict(environment=environment, ensemble=ensemble, model=model,
              classical_strategy=classical_strategy)
    s_r = three_pulse_signal(species, sequence.with_dT(dT_res), **kw).total
    s_o = three_pulse_signal(species, sequence.with_dT(dT_off), **kw).total
    if s_o == 0:
        raise DegenerateReferenceError("off-resonant reference signal vanishes")
    return (s_r - s_o) / s_o


def timing_fwhm(sigma_v: float, period_d: float) -> float:
    """FWHM in dT of the first-harmonic washout exp(-(G sigma_v dT)^2 / 2)."""
    return 2 * math.sqrt(2 * math.log(2)) / (2 * math.pi / period_d * sigma_v)


def timing_scan(species, sequence, ensemble, dT_grid: Iterable[float],
                environment=None, model: str = "quantum",
                dT_off: float = DEFAULT_OFF_RESONANCE) -> ScanResult:
    grid = np.asarray(list(dT_grid), dtype=float)
    kw = dict(environment=environment, ensemble=ensemble, model=model)
    s_o = three_pulse_signal(species, sequence.with_dT(dT_off), **kw).total
    if s_o == 0:
        raise DegenerateReferenceError("off-resonant reference signal vanishes")
    values = [(three_pulse_signal(species, sequence.with_dT(t), **kw).total - s_o) / s_o
              for t in grid]
    return ScanResult(
        parameter="dT",
        columns={"dT": grid, "delta_sn": values},
        units={"dT": "s", "delta_sn": "1"},
        metadata={"scan": "timing", "model": model, "species_N": species.n_units,
                  "T": sequence.T, "sigma_v": ensemble.sigma_v,
                  "fwhm_expected": timing_fwhm(ensemble.sigma_v, sequence.g1.period_d)},
    )


def mass_scan(
    family: Sequence[ClusterSpecies],
    T: float,
    ensemble: BeamEnsemble,
    environment: InertialEnvironment | None = None,
    models: Sequence[str] = ("quantum", "classical"),
    fluences: float | Sequence[float] = DEFAULT_FLUENCE,
    V: float = 1.0,
    band: tuple[float, float] = (0.7, 1.3),
    dT_off: float = DEFAULT_OFF_RESONANCE,
    n0_override=None,
) -> ScanResult:
    """Contrast per cluster size, with polarizability sensitivity band per model.

    `n0_override` maps cluster size N to a triple of n0 values.
    """
    cols: dict[str, list[float]] = {"N": [], "mass": []}
    units = {"N": "1", "mass": "amu"}
    for sp in family:
        cols["N"].append(sp.n_units)
        cols["mass"].append(sp.mass)
        n0 = None if n0_override is None else n0_override(sp.n_units)
        for model in models:
            for tag, scale in (("", 1.0), (f"_a{band[0]:g}", band[0]), (f"_a{band[1]:g}", band[1])):
                seq = species_sequence(sp, T, 0.0, fluences, V, n0=n0, alpha_scale=scale)
                val = delta_sn(sp, seq, environment, ensemble, model, dT_off)
                cols.setdefault(f"dsn_{model}{tag}", []).append(val)
                units[f"dsn_{model}{tag}"] = "1"
    return ScanResult("N", cols, units, metadata={"scan": "mass", "T": T, "band": list(band),
                                                  "models": list(models)})


def height_scan(species, sequence, ensemble, z_grid: Iterable[float],
                beam_height_spread: float = 0.0, decay_length: float | None = None,
                model: str = "quantum", dT_off: float = DEFAULT_OFF_RESONANCE) -> ScanResult:
    """Contrast against mirror distance with the middle beam tilted."""
    z_grid = np.asarray(list(z_grid), dtype=float)
    theta = sequence.g2.tilt_theta
    values, shifts = [], []
    for z in z_grid:
        env = InertialEnvironment(mirror_distance=z, beam_height_spread=beam_height_spread,
                                  coherence_decay_length=decay_length)
        values.append(delta_sn(species, sequence, env, ensemble, model, dT_off))
        shifts.append(tilt_phase(z, theta))
    return ScanResult(
        parameter="z_m",
        columns={"z_m": z_grid, "delta_sn": values, "fringe_shift": shifts},
        units={"z_m": "m", "delta_sn": "1", "fringe_shift": "m"},
        metadata={"scan": "height", "model": model, "theta": theta,
                  "period_expected": sequence.g2.period_d / (2 * (1 - math.cos(theta)))
                  if theta else None},
    )


def accel_scan(species, sequence, ensemble, a_grid: Iterable[float],
               model: str = "quantum", dT_off: float = DEFAULT_OFF_RESONANCE,
               mirror_distance: float = 1.5e-3) -> ScanResult:
    a_grid = np.asarray(list(a_grid), dtype=float)
    values, shifts, moduli = [], [], []
    for acc in a_grid:
        env = InertialEnvironment(acceleration_along_grating=acc, mirror_distance=mirror_distance)
        values.append(delta_sn(species, sequence, env, ensemble, model, dT_off))
        shifts.append(acceleration_phase(acc, sequence)[0])
        sig = three_pulse_signal(species, sequence, env, ensemble, model)
        moduli.append(abs(sig.s(1)))
    return ScanResult(
        parameter="acceleration",
        columns={"acceleration": a_grid, "delta_sn": values, "fringe_shift": shifts,
                 "abs_s1": moduli},
        units={"acceleration": "m/s^2", "delta_sn": "1", "fringe_shift": "m", "abs_s1": "1"},
        metadata={"scan": "acceleration", "model": model, "T": sequence.T},
    )


def mass_resolution_smear(signal, masses, resolution: float | None = 1 / 3000,
                          isotope_width: float = 0.0, n_points: int = 21) -> np.ndarray:
    """Boxcar average of a mass-dependent signal over the instrument window.

    `signal` is a callable of mass (amu) or a pair (mass_grid, values) that is
    linearly interpolated.  The window is m +- m * resolution / 2 widened by
    +- isotope_width; resolution None means an ideal instrument.
    """
    masses = np.atleast_1d(np.asarray(masses, dtype=float))
    if not callable(signal):
        grid, vals = (np.asarray(v, dtype=float) for v in signal)
        signal = lambda m: np.interp(m, grid, vals)  # noqa: E731
    half = (0.0 if resolution is None else masses * resolution / 2) + isotope_width
    half = np.broadcast_to(half, masses.shape)
    out = np.empty_like(masses)
    offsets = np.linspace(-1.0, 1.0, n_points)
    for i, (m, w) in enumerate(zip(masses, half)):
        if w == 0:
            out[i] = float(np.asarray(signal(m)))
        else:
            out[i] = float(np.mean([np.asarray(signal(m + w * o)) for o in offsets]))
    return out


def signal_at_mass(template: ClusterSpecies, T: float, ensemble: BeamEnsemble, n0: float,
                   phi0: float, model: str = "quantum", dT_off: float = DEFAULT_OFF_RESONANCE):
    """Contrast as a continuous function of mass with fixed grating strengths."""
    def f(mass: float) -> float:
        sp = replace(template, mass=float(mass))
        seq = PulseSequence.build(T, 0.0, dict(n0=n0, phi0=phi0))
        return delta_sn(sp, seq, None, ensemble, model, dT_off)
    return f


def resonant_signal_batch(
    species: ClusterSpecies,
    T1,
    T2,
    n0,
    phi0,
    ensemble: BeamEnsemble,
    V: float = 1.0,
    tilts: Sequence[float] = (0.0, 0.0, 0.0),
    period_d: float | None = None,
    environment: InertialEnvironment | None = None,
    model: str = "quantum",
) -> np.ndarray:
    """Flux for many shots at once, keeping only the resonant terms b = -2a.

    `T1`, `T2` have shape (S,), `n0` and `phi0` shape (3, S).  Valid when the
    velocity spread washes out every non-resonant term; this is checked.
    """
    from .core import GRATING_PERIOD

    d = GRATING_PERIOD if period_d is None else period_d
    G = 2 * math.pi / d
    T1 = np.atleast_1d(np.asarray(T1, dtype=float))
    T2 = np.atleast_1d(np.asarray(T2, dtype=float))
    n0 = np.asarray(n0, dtype=float).reshape(3, -1)
    phi0 = np.asarray(phi0, dtype=float).reshape(3, -1)
    env = environment or InertialEnvironment()
    Tmin = float(min(T1.min(), T2.min()))
    if np.max(np.abs(ensemble.characteristic(np.array([0.5 * G * Tmin])))) > WEIGHT_FLOOR:
        raise ConfigurationError("velocity spread too narrow for the resonant-only batch path")
    m = max(amplitude_coefficients(GratingPulse(0.0, d, float(n0[k].max()), float(np.abs(phi0[k]).max()),
                                                V)).order_cutoff for k in range(3))
    n = np.arange(-m, m + 1)[:, None]
    Tm = talbot_time(species.mass, d)
    e1, e2 = T1[None, :] / Tm, T2[None, :] / Tm
    k1 = kernel_at(n0[0][None, :], phi0[0][None, :], V, n * (e1 - e2), n, model)
    k2 = kernel_at(n0[1][None, :], phi0[1][None, :], V, -n * e2, -2 * n, model)
    a3 = kernel_at(n0[2][None, :], phi0[2][None, :], V, 0.0, n, model).real

    z = env.mirror_distance
    x1, x2, x3 = acceleration_offsets(env.acceleration_along_grating, T1, T2)
    ox = env.grating_offsets
    c = [1 - math.cos(t) for t in tilts]
    tilt_arm = -n * (c[0] - 2 * c[1] + c[2])
    lever = n * ((ox[0] + x1) - 2 * (ox[1] + x2) + (ox[2] + x3))[None, :] + z * tilt_arm
    dT = (T2 - T1)[None, :]
    weight = np.asarray(ensemble.characteristic(G * n * dT)) * np.exp(-1j * G * lever)
    if env.beam_height_spread:
        weight = weight * np.exp(-0.5 * (G * env.beam_height_spread * tilt_arm) ** 2)
    if env.coherence_decay_length:
        weight = np.where(n != 0, weight * math.exp(-z / env.coherence_decay_length), weight)
    coherent = np.sum(k1 * k2 * a3 * weight, axis=0).real

    eta = species.ionization_yield
    if eta < 1.0:
        survive = np.prod([kernel_at(eta * n0[k], 0.0, V, 0.0, 0).real for k in range(3)], axis=0)
        absorb_free = np.prod([kernel_at(n0[k], 0.0, V, 0.0, 0).real for k in range(3)], axis=0)
        coherent = coherent + survive - absorb_free
    return coherent
