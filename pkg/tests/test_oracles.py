import numpy as np
import pytest

import tdtli.engine as engine
from tdtli.core import GratingPulse, PulseSequence
from tdtli.ensemble import BeamEnsemble, GaussianDist, as_discrete
from tdtli.gratings import transmission_amplitude
from tdtli.oracles import (
    GridState,
    OracleRefusal,
    classical_mc_oracle,
    grid_quantum_oracle,
)

SIGMA_V = 0.62


def seq(T, dT=0.0, n0=2.0, phi0=1.0):
    return PulseSequence.build(T, dT, dict(n0=n0, phi0=phi0))


def test_transparent_gratings_full_flux(heptamer, talbot_heptamer):
    g = GaussianDist(0.0, SIGMA_V)
    assert grid_quantum_oracle(seq(talbot_heptamer, 0, 0, 0), heptamer, g, 4, 64) == pytest.approx(1.0)
    mc = classical_mc_oracle(seq(talbot_heptamer, 0, 0, 0), heptamer, g, 20_000, seed=3)
    assert mc.flux == 1.0


def test_integer_talbot_revival(heptamer, talbot_heptamer):
    p = GratingPulse(0.0, n0=2.0, phi0=1.0)
    state = GridState(np.ones(256, dtype=complex), p.period_d, heptamer.mass)
    start = GridState(state.samples * transmission_amplitude(state.x, p), p.period_d, heptamer.mass)
    revived = start.evolve(2 * talbot_heptamer)
    assert np.max(np.abs(revived.samples - start.samples)) < 1e-8
    assert revived.norm == pytest.approx(start.norm)


@pytest.mark.parametrize("n0,phi0,xi,dT", [(2.0, 1.0, 1.0, 0.0), (4.0, 3.0, 0.5, 50e-9),
                                           (0.5, 1.0, 0.1, 100e-9), (2.0, 3.0, 0.73, -80e-9)])
def test_engine_matches_grid(heptamer, talbot_heptamer, n0, phi0, xi, dT):
    g = GaussianDist(0.0, SIGMA_V)
    beam = BeamEnsemble(925.0, transverse=as_discrete(g.quantile_classes(16)))
    sq = seq(xi * talbot_heptamer, dT, n0, phi0)
    e = engine.three_pulse_signal(heptamer, sq, ensemble=beam).total
    o = grid_quantum_oracle(sq, heptamer, g, 16, 512)
    assert abs(e - o) <= 1e-6 * abs(o)


def test_kernel_sign_convention_is_pinned(heptamer, talbot_heptamer, monkeypatch):
    g = GaussianDist(0.0, SIGMA_V)
    beam = BeamEnsemble(925.0, transverse=as_discrete(g.quantile_classes(8)))
    offsets = (0.0, 13e-9, 0.0)
    env = engine.InertialEnvironment(grating_offsets=offsets)
    sq = seq(0.37 * talbot_heptamer, 0.0, 2.0, 1.5)
    o = grid_quantum_oracle(sq, heptamer, g, 8, 512, offsets=offsets)
    e = engine.three_pulse_signal(heptamer, sq, env, beam).total
    assert abs(e - o) <= 1e-6 * abs(o)
    original = engine.kernel_at
    flipped = lambda n0, phi0, V, xi, n, *a: original(n0, phi0, V, -np.asarray(xi), n, *a)  # noqa: E731
    monkeypatch.setattr(engine, "kernel_at", flipped)
    e_flip = engine.three_pulse_signal(heptamer, sq, env, beam).total
    assert abs(e_flip - o) > 1e-3 * abs(o)


def test_mc_refuses_small_samples(heptamer, talbot_heptamer):
    with pytest.raises(OracleRefusal):
        classical_mc_oracle(seq(talbot_heptamer), heptamer, GaussianDist(0, 1), 100)


def test_mc_deterministic(heptamer, talbot_heptamer):
    g = GaussianDist(0.0, SIGMA_V)
    a = classical_mc_oracle(seq(talbot_heptamer), heptamer, g, 20_000, seed=9)
    b = classical_mc_oracle(seq(talbot_heptamer), heptamer, g, 20_000, seed=9)
    assert a.flux == b.flux


def test_kick_free_classical_equals_quantum_at_small_xi(heptamer, talbot_heptamer):
    g = GaussianDist(0.0, SIGMA_V)
    sq = seq(0.002 * talbot_heptamer, 0.0, 2.0, 0.0)
    beam = BeamEnsemble(925.0, transverse=g)
    q = engine.three_pulse_signal(heptamer, sq, ensemble=beam).total
    mc = classical_mc_oracle(sq, heptamer, g, 1_000_000, seed=5)
    assert abs(q - mc.flux) <= 3 * mc.stderr


def test_classical_engine_against_trajectories(heptamer, talbot_heptamer):
    g = GaussianDist(0.0, SIGMA_V)
    beam = BeamEnsemble(925.0, transverse=g)
    sq = seq(0.5 * talbot_heptamer, 0.0, 2.0, 1.0)
    c = engine.three_pulse_signal(heptamer, sq, ensemble=beam, model="classical").total
    mc = classical_mc_oracle(sq, heptamer, g, 1_000_000, seed=11)
    assert abs(c - mc.flux) <= 3 * mc.stderr
