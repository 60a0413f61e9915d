import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdtli.core import GratingPulse
from tdtli.gratings import (
    M_MAX_CAP,
    TAIL_BOUND,
    absorption_profile,
    amplitude_coefficients,
    classical_coefficients,
    infer_n0_from_transmission,
    kernel_at,
    mask_coefficients,
    mean_transmission,
    talbot_coefficients,
    talbot_coefficients_by_sum,
    transmission_amplitude,
)

# frozen from direct quadrature of t(x - xi d/2) conj t(x + xi d/2) over one period
B1_N2_PHI1_XI05 = 0.16188556357101197
# classical kernel at the same point; its gap to B1 is checked against trajectories elsewhere
C1_N2_PHI1_XI05 = 0.08687605803958938


def pulse(n0=0.0, phi0=0.0, V=1.0):
    return GratingPulse(0.0, n0=n0, phi0=phi0, modulation_depth_V=V)


def centre(arr):
    return len(arr) // 2


def test_transmission_values():
    p = pulse()
    x = np.linspace(0, p.period_d, 17)
    assert np.allclose(transmission_amplitude(x, p), 1.0)
    p = pulse(2.0, 0.7)
    node = p.period_d / 2
    assert abs(transmission_amplitude(node, p)) == pytest.approx(1.0, abs=1e-15)
    assert abs(transmission_amplitude(0.0, pulse(2.0))) ** 2 == pytest.approx(math.exp(-2), rel=1e-14)
    assert absorption_profile(0.0, pulse(2.0)) == 2.0


def test_amplitude_coefficients():
    t = amplitude_coefficients(pulse())
    assert t.b(0) == 1 and all(t.b(m) == 0 for m in (1, -1, 3))
    t = amplitude_coefficients(pulse(2.0))
    assert t.b(0).real == pytest.approx(0.6450, abs=5e-5)
    # quadrature cross-check
    p = pulse(2.0)
    x = np.linspace(0, p.period_d, 4096, endpoint=False)
    assert np.mean(transmission_amplitude(x, p)).real == pytest.approx(t.b(0).real, rel=1e-13)
    t = amplitude_coefficients(pulse(1.3, 2.2, 0.8))
    for m in range(1, 6):
        assert t.b(m) == pytest.approx(t.b(-m), rel=1e-15)


def test_tail_bound_and_auto_cutoff():
    t = amplitude_coefficients(pulse(4.0, 30.0))
    b = np.abs(t.amplitude_coeffs)
    assert b[-1] <= TAIL_BOUND * b.max()
    assert t.order_cutoff <= M_MAX_CAP


def test_mask_coefficients():
    A = mask_coefficients(pulse())
    c = centre(A)
    assert A[c] == 1 and np.all(A[np.arange(len(A)) != c] == 0)
    t = amplitude_coefficients(pulse(2.0))
    assert t.A(0) == pytest.approx(0.4658, abs=5e-5)
    assert t.A(1) == pytest.approx(-0.2079, abs=5e-5)
    p = pulse(2.0)
    x = np.linspace(0, p.period_d, 4096, endpoint=False)
    mask = np.exp(-absorption_profile(x, p))
    G = 2 * np.pi / p.period_d
    assert np.mean(mask * np.exp(-1j * G * x)).real == pytest.approx(t.A(1), rel=1e-12)


@pytest.mark.parametrize("n0", [0.0, 0.5, 2.0, 4.0])
@pytest.mark.parametrize("phi0", [0.0, 1.0, 3.0])
@pytest.mark.parametrize("V", [0.5, 1.0])
def test_autocorrelation_identity(n0, phi0, V):
    t = amplitude_coefficients(pulse(n0, phi0, V))
    B0 = talbot_coefficients_by_sum(t, 0.0)
    assert np.max(np.abs(B0 - t.mask_coeffs)) <= 1e-10
    assert np.all(t.mask_coeffs <= t.A(0) + 1e-15)
    assert 0 < t.A(0) <= 1


def test_infer_n0():
    assert infer_n0_from_transmission(1.0) == 0.0
    assert infer_n0_from_transmission(0.4658) == pytest.approx(2.000, abs=1e-3)
    assert infer_n0_from_transmission(mean_transmission(2.0, 1.0)) == pytest.approx(2.0, abs=1e-6)
    assert infer_n0_from_transmission(0.4658, V=0.0) == pytest.approx(1.528, abs=5e-4)


def test_monotone_extinction():
    a = [mean_transmission(n0, 1.0) for n0 in np.linspace(0, 6, 61)]
    assert np.all(np.diff(a) < 0)


def test_kernel_pinned_value():
    t = amplitude_coefficients(pulse(2.0, 1.0))
    B = talbot_coefficients(t, 0.5)
    assert B[centre(B) + 1].real == pytest.approx(B1_N2_PHI1_XI05, rel=1e-12)
    assert complex(kernel_at(2.0, 1.0, 1.0, 0.5, 1)).real == pytest.approx(B1_N2_PHI1_XI05, rel=1e-12)
    C = classical_coefficients(t, 0.5)
    assert C[centre(C) + 1].real == pytest.approx(C1_N2_PHI1_XI05, rel=1e-12)
    assert abs(C[centre(C) + 1] - B[centre(B) + 1]) > 0.05


def test_static_limits():
    t = amplitude_coefficients(pulse(1.7, 2.3, 0.9))
    B = talbot_coefficients(t, 0.0)
    C = classical_coefficients(t, 0.0)
    assert np.allclose(B, t.mask_coeffs, atol=1e-14)
    assert np.allclose(C, t.mask_coeffs, atol=1e-14)
    pure = amplitude_coefficients(pulse(0.0, 2.0))
    B = talbot_coefficients(pure, 0.0)
    assert B[centre(B)] == pytest.approx(1.0) and np.sum(np.abs(B)) == pytest.approx(1.0)


def test_small_xi_convergence_order():
    t = amplitude_coefficients(pulse(2.0, 1.0))
    gaps = []
    for xi in (0.04, 0.02, 0.01):
        B = talbot_coefficients(t, xi)
        C = classical_coefficients(t, xi, strategy="linearized-talbot")
        gaps.append(np.max(np.abs(B - C)))
    # third order in xi
    assert gaps[0] / gaps[1] == pytest.approx(8.0, rel=0.05)
    assert gaps[1] / gaps[2] == pytest.approx(8.0, rel=0.05)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 4), st.floats(0, 3), st.floats(0.3, 1), st.floats(-1.5, 1.5))
def test_closed_form_matches_double_sum(n0, phi0, V, xi):
    t = amplitude_coefficients(pulse(n0, phi0, V))
    B = talbot_coefficients(t, xi)
    ref = talbot_coefficients_by_sum(t, xi)
    assert np.max(np.abs(B - ref)) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 4), st.floats(0, 3), st.floats(-2, 2))
def test_kernel_symmetry_and_unitarity(n0, phi0, xi):
    t = amplitude_coefficients(pulse(n0, phi0))
    B = talbot_coefficients(t, xi)
    # even profiles give real kernels, and reversing n is reversing the shear
    assert np.max(np.abs(B.imag)) <= 1e-14
    assert np.allclose(B[::-1], talbot_coefficients(t, -xi), atol=1e-14)
    pure = amplitude_coefficients(pulse(0.0, phi0))
    assert np.sum(np.abs(pure.amplitude_coeffs) ** 2) == pytest.approx(1.0, abs=1e-10)
    # a pure phase grating self-images at integer Talbot orders
    B0 = talbot_coefficients(pure, float(round(xi)))
    assert B0[centre(B0)] == pytest.approx(1.0, abs=1e-12)


def test_kernel_at_broadcasts():
    n = np.arange(-3, 4)
    vals = kernel_at(2.0, 1.0, 1.0, 0.37, n)
    B = talbot_coefficients(amplitude_coefficients(pulse(2.0, 1.0)), 0.37)
    c = centre(B)
    assert np.allclose(vals, B[c - 3:c + 4], atol=1e-15)
    with pytest.raises(ValueError):
        kernel_at(1, 1, 1, 0.1, 1, model="other")
    with pytest.raises(ValueError):
        classical_coefficients(amplitude_coefficients(pulse(1.0)), 0.1, strategy="nope")
