#!/usr/bin/env python3
"""
Two-photon state algebra: Bell states, correlations, CHSH, visibilities, QBER.
"""

import math
import sys

import numpy as np

from harness import run_tests
from core.errors import ConfigError, ZeroTotalError
from core.polarization import (
    TwoPhotonState,
    binary_entropy,
    chsh_s,
    coincidence_curve,
    coincidence_probability,
    concurrence,
    correlation_analytic,
    correlation_e,
    fidelity_to_bell,
    key_fraction,
    make_bell_state,
    make_noisy_state,
    make_state,
    predicted_visibilities,
    qber_from_visibility,
    visibility,
)
from core.state import AnalyzerSetting, Arm, Basis

TSIRELSON = 2.0 * math.sqrt(2.0)
OPTIMAL = (0.0, 45.0, -22.5, 22.5)


def _random_state(rng: np.random.Generator) -> TwoPhotonState:
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    return TwoPhotonState(rho / np.trace(rho).real)


def test_bell_state_reaches_tsirelson_bound():
    assert abs(chsh_s(make_bell_state(math.pi), *OPTIMAL) - TSIRELSON) < 1e-9


def test_random_states_never_exceed_tsirelson_bound():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(10_000):
        state = _random_state(rng)
        angles = rng.uniform(0.0, 180.0, 4)
        worst = max(worst, abs(chsh_s(state, *OPTIMAL)), abs(chsh_s(state, *angles)))
    assert worst <= TSIRELSON + 1e-9


def test_in_orbit_visibilities_give_paper_like_s():
    s = chsh_s(make_noisy_state(0.975, 0.88), *OPTIMAL)
    assert 2.50 <= s <= 2.70
    assert abs(s - math.sqrt(2.0) * (0.975 + 0.88)) < 1e-9


def test_hh_projection_of_phi_minus():
    p = coincidence_probability(make_bell_state(math.pi), AnalyzerSetting(0.0, 0.0))
    assert abs(p - 0.5) < 1e-12


def test_correlations_of_phi_minus():
    state = make_bell_state(math.pi)
    assert abs(correlation_e(state, 0.0, 0.0) - 1.0) < 1e-12
    assert abs(correlation_e(state, 45.0, 45.0) + 1.0) < 1e-12
    assert abs(correlation_e(state, 0.0, 45.0)) < 1e-12


def test_correlation_matches_closed_form():
    rng = np.random.default_rng(2)
    state = make_noisy_state(0.95, 0.8)
    for a, b in rng.uniform(-90.0, 180.0, (50, 2)):
        assert abs(correlation_e(state, a, b) - correlation_analytic(0.95, 0.8, a, b)) < 1e-12


def test_coincidence_curve_is_cos_squared_for_ideal_state():
    angles = np.arange(0.0, 180.0, 15.0)
    curve = coincidence_curve(make_bell_state(math.pi), Arm.SIGNAL, 0.0, angles)
    assert np.allclose(curve, 0.5 * np.cos(np.radians(angles)) ** 2, atol=1e-12)


def test_predicted_visibilities_match_noise_parameters():
    v = predicted_visibilities(make_noisy_state(0.975, 0.88))
    assert abs(v.v_h - 0.975) < 1e-9 and abs(v.v_v - 0.975) < 1e-9
    assert abs(v.v_d - 0.88) < 1e-9 and abs(v.v_a - 0.88) < 1e-9


def test_visibility_edge_cases():
    assert visibility(1.0, 0.0) == 1.0
    assert visibility(5.0, 5.0) == 0.0
    for bad in ((0.0, 0.0),):
        try:
            visibility(*bad)
        except ZeroTotalError:
            pass
        else:
            raise AssertionError("c_max + c_min = 0 must raise ZeroTotalError")
    try:
        visibility(1.0, 2.0)
    except ConfigError:
        pass
    else:
        raise AssertionError("c_max < c_min must raise ConfigError")


def test_qber_from_orbit_visibilities():
    assert math.isclose(qber_from_visibility(np.mean([0.97, 0.97, 0.84, 0.90])), 0.040, abs_tol=1e-12)
    assert qber_from_visibility(1.0) == 0.0


def test_key_fraction():
    assert key_fraction(0.0) == 1.0
    assert key_fraction(0.12) == 0.0  # past the BBM92 threshold
    assert 0.0 < key_fraction(0.04) < 1.0
    assert abs(binary_entropy(0.5) - 1.0) < 1e-12


def test_noisy_state_validation():
    for v_hv, v_da in ((0.8, 0.9), (1.1, 0.5), (0.9, -0.1)):
        try:
            make_noisy_state(v_hv, v_da)
        except ConfigError:
            continue
        raise AssertionError(f"make_noisy_state({v_hv}, {v_da}) must be rejected")


def test_state_validation():
    try:
        TwoPhotonState(2.0 * np.eye(4) / 4.0)
    except ConfigError:
        pass
    else:
        raise AssertionError("trace 2 must be rejected")
    try:
        TwoPhotonState(np.diag([1.5, -0.5, 0.0, 0.0]))
    except ConfigError:
        pass
    else:
        raise AssertionError("negative eigenvalue must be rejected")


def test_fidelity_and_concurrence():
    bell = make_bell_state(math.pi)
    assert abs(fidelity_to_bell(bell) - 1.0) < 1e-12
    assert abs(concurrence(bell) - 1.0) < 1e-6
    # X state: C = 2 max(0, |rho_03| - sqrt(rho_11 rho_22)) = 0.5 here
    assert abs(concurrence(make_state(math.pi, 1.0, 0.5)) - 0.5) < 1e-6
    assert concurrence(make_state(math.pi, 0.3, 0.0)) == 0.0


def test_phase_rotates_d_a_contrast():
    # Away from pi the D/A correlation shrinks as |cos(delta_phi - pi)|
    state = make_state(math.pi + math.pi / 3.0)
    assert abs(correlation_e(state, 45.0, 45.0) + 0.5) < 1e-12


def test_s_unchanged_when_every_angle_turns_half_a_revolution():
    rng = np.random.default_rng(3)
    for _ in range(50):
        state = _random_state(rng)
        angles = rng.uniform(-90.0, 180.0, 4)
        assert abs(chsh_s(state, *(angles + 180.0)) - chsh_s(state, *angles)) < 1e-12


def test_maximally_mixed_state_has_no_correlation():
    mixed = TwoPhotonState(np.eye(4) / 4.0)
    assert abs(chsh_s(mixed, *OPTIMAL)) < 1e-12
    for a, b in np.random.default_rng(4).uniform(0.0, 180.0, (20, 2)):
        assert abs(correlation_e(mixed, a, b)) < 1e-12


def test_complementary_projections_sum_to_one():
    rng = np.random.default_rng(5)
    for _ in range(50):
        state = _random_state(rng)
        a, b = rng.uniform(0.0, 180.0, 2)
        settings = (AnalyzerSetting(a, b), AnalyzerSetting(a + 90.0, b + 90.0),
                    AnalyzerSetting(a, b + 90.0), AnalyzerSetting(a + 90.0, b))
        assert abs(sum(coincidence_probability(state, s) for s in settings) - 1.0) < 1e-12


def test_quarter_phase_erases_d_a_contrast():
    v = predicted_visibilities(make_state(math.pi / 2.0))
    assert abs(v.v_d) < 1e-9 and abs(v.v_a) < 1e-9
    assert abs(v.v_h - 1.0) < 1e-9


def test_noisy_state_limits():
    phi_minus = np.array([1.0, 0.0, 0.0, -1.0]) / math.sqrt(2.0)
    assert np.array_equal(make_noisy_state(1.0, 1.0).rho, make_bell_state(math.pi).rho)
    assert np.allclose(make_noisy_state(1.0, 1.0).rho, np.outer(phi_minus, phi_minus), atol=1e-15)
    v = predicted_visibilities(make_noisy_state(0.5, 0.5))
    assert abs(v.v_hv - 0.5) < 1e-9 and abs(v.v_da - 0.5) < 1e-9


def test_basis_angles():
    assert [b.angle_deg for b in Basis] == [0.0, 90.0, 45.0, 135.0]
    assert AnalyzerSetting(Basis.A.angle_deg + 90.0, -Basis.D.angle_deg) == AnalyzerSetting(45.0, 135.0)


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "Polarization core"))
