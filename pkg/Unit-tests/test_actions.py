#!/usr/bin/env python3
"""
Experiment actions: sweeps, curve fits, CHSH extraction and the laser survey.
"""

import dataclasses
import math
import sys

import numpy as np

from harness import run_tests
from config.paths import GROUND_TEST_SCENARIO
from config.scenario_file import ScenarioConfig, load_scenario, with_overrides
from core import actions
from core.errors import ConfigError, DegenerateDataError, MissingSettingError, NotOperableError
from core.polarization import correlation_analytic
from core.state import AnalyzerSetting, Arm, Basis, CountRecord, Illumination, ThermalState
from hardware.laser import LaserOperatingPoint, optimal_current, visibility_at
from utils.seeds import derive_seed

SCENARIO = ScenarioConfig()
ANALYTIC_S = math.sqrt(2.0) * (0.975 + 0.88)


def _analytic_s(v_hv, v_da, a, a_prime, b, b_prime):
    return (correlation_analytic(v_hv, v_da, a, b) + correlation_analytic(v_hv, v_da, a, b_prime)
            + correlation_analytic(v_hv, v_da, a_prime, b) - correlation_analytic(v_hv, v_da, a_prime, b_prime))


def _curve_records(counts, angles, t=1.0):
    return [CountRecord(1e6, 1e6, float(c), t, AnalyzerSetting(0.0, angle)) for c, angle in zip(counts, angles)]


def _model(amplitude, visibility, phase, angles):
    return amplitude * (1.0 - visibility * np.cos(np.radians(2.0 * (np.asarray(angles) - phase))))


def _angle_difference(a, b):
    d = abs(a - b) % 180.0
    return min(d, 180.0 - d)


def test_rates_at_paper_operating_point():
    point = actions.resolve_operating_point(SCENARIO, SCENARIO.operating_temperature_c)
    assert point.current == 30.0
    rates = actions.operating_rates(SCENARIO, point, SCENARIO.operating_temperature_c)
    assert abs(rates.pump_power_mw - 27.0) < 1e-9
    efficiency = actions.geometric_efficiency(SCENARIO)
    assert abs(rates.detected_pairs - 27.0 * 44_000.0 * efficiency * 0.45 ** 2) < 1e-6
    assert 2000.0 < rates.detected_pairs < 2500.0
    assert abs(rates.singles - 80.0 * rates.detected_pairs) < 1e-6
    assert abs(rates.accidentals - (rates.singles + 500.0) ** 2 * 4.84e-9) < 1e-6


def test_explicit_efficiency_overrides_layout():
    point = LaserOperatingPoint(30.0, SCENARIO.operating_temperature_c)
    fixed = with_overrides(SCENARIO, geometric_efficiency=0.01)
    rates = actions.operating_rates(fixed, point, point.temperature)
    assert abs(rates.detected_pairs - 2405.7) < 1e-6
    far = with_overrides(fixed, layout=dataclasses.replace(SCENARIO.layout, detector_distance_mm=300.0))
    assert actions.operating_rates(far, point, point.temperature).detected_pairs == rates.detected_pairs


def test_detector_distance_lowers_detected_pairs():
    point = LaserOperatingPoint(30.0, SCENARIO.operating_temperature_c)
    far = with_overrides(SCENARIO, layout=dataclasses.replace(SCENARIO.layout, detector_distance_mm=300.0))
    near_rates = actions.operating_rates(SCENARIO, point, point.temperature)
    far_rates = actions.operating_rates(far, point, point.temperature)
    # signal and idler cones grow ~3x in radius against a fixed detector
    assert far_rates.detected_pairs < 0.2 * near_rates.detected_pairs
    assert far_rates.singles < near_rates.singles
    assert actions.geometric_efficiency(far) == actions.layout_efficiency(far.layout)
    hits = actions.layout_efficiency.cache_info().hits
    actions.operating_rates(far, point, point.temperature)
    assert actions.layout_efficiency.cache_info().hits > hits


def test_ground_test_rates():
    scenario = load_scenario(GROUND_TEST_SCENARIO)
    point = actions.resolve_operating_point(scenario, scenario.operating_temperature_c)
    rates = actions.operating_rates(scenario, point, scenario.operating_temperature_c)
    assert abs(rates.detected_pairs - 1393.5) < 1.0


def test_sweep_plan_limits():
    angles = tuple(np.arange(0.0, 180.0, 15.0))  # 165° span
    try:
        actions.SweepPlan(Arm.SIGNAL, Basis.H, angles, 0.5)
    except ConfigError:
        pass
    else:
        raise AssertionError("sweep beyond the LCPR range must be rejected")
    try:
        actions.SweepPlan(Arm.SIGNAL, Basis.H, (0.0, 15.0, 30.0), 0.5)
    except ConfigError:
        pass
    else:
        raise AssertionError("too few sweep points must be rejected")
    plan = actions.SweepPlan(Arm.IDLER, Basis.D, tuple(np.arange(0.0, 150.0, 15.0)), 0.5)
    assert plan.setting(30.0) == AnalyzerSetting(30.0, 45.0)


def test_noiseless_sweep_records():
    plan = actions.chsh_plan(SCENARIO)[0]
    records = actions.run_sweep(SCENARIO, plan, noiseless=True)
    assert len(records) == 13
    assert records[0].setting == AnalyzerSetting(0.0, -22.5)
    temperature = SCENARIO.operating_temperature_c
    rates = actions.operating_rates(SCENARIO, LaserOperatingPoint(30.0, temperature), temperature)
    # H fixed, idler at 0: rho_HH of the emitted state
    hh = next(r for r in records if r.setting.theta_idler == 0.0)
    t = SCENARIO.integration_time_per_point_s
    expected = (rates.detected_pairs * 0.5 * (1.0 + 0.975) / 2.0 + rates.accidentals) * t
    assert abs(hh.coincidences - expected) < 1e-6


def test_sweep_outside_operating_window():
    cold = ThermalState(0.0, 10.0, False, Illumination.SUN)
    try:
        actions.run_sweep(SCENARIO, actions.chsh_plan(SCENARIO)[0], cold)
    except NotOperableError:
        return
    raise AssertionError("a sweep at 10 degC must raise NotOperableError")


def test_fit_recovers_noiseless_curve():
    angles = np.arange(0.0, 180.0, 15.0)
    fit = actions.fit_curve(_curve_records(_model(1000.0, 0.9, 30.0, angles), angles))
    assert abs(fit.amplitude - 1000.0) < 1e-6
    assert abs(fit.visibility - 0.9) < 1e-8
    assert _angle_difference(fit.phase_offset, 30.0) < 1e-6
    assert 0.0 <= fit.phase_offset < 180.0


def test_fit_under_poisson_noise():
    angles = np.arange(0.0, 180.0, 15.0)
    expected = _model(10_000.0, 0.9, 30.0, angles)
    fits = []
    for trial in range(100):
        counts = np.random.default_rng(derive_seed(4, trial)).poisson(expected)
        fits.append(actions.fit_curve(_curve_records(counts, angles)))
    for name, truth in (("amplitude", 10_000.0), ("visibility", 0.9)):
        values = np.array([getattr(f, name) for f in fits])
        errors = np.array([getattr(f, f"{name}_err") for f in fits])
        assert np.mean(np.abs(values - truth) <= 3.0 * errors) >= 0.95, name
        assert abs(values.mean() - truth) < 4.0 * errors.mean() / math.sqrt(len(fits)), name
    within = [_angle_difference(f.phase_offset, 30.0) <= 3.0 * f.phase_offset_err for f in fits]
    assert np.mean(within) >= 0.95


def test_fit_rejects_degenerate_data():
    wide = np.arange(0.0, 180.0, 15.0)
    cases = (
        _curve_records([100.0] * 3, wide[:3]),                        # too few points
        _curve_records([100.0] * len(wide), wide),                    # flat
        _curve_records(_model(100.0, 0.5, 0.0, wide[:5]), wide[:5]),  # 60° span
    )
    for records in cases:
        try:
            actions.fit_curve(records)
        except DegenerateDataError:
            continue
        raise AssertionError("degenerate curve must raise DegenerateDataError")


def test_noiseless_chsh_matches_analytic_value():
    measurement = actions.measure_chsh(SCENARIO, noiseless=True)
    assert abs(measurement.s - ANALYTIC_S) < 1e-6
    assert len(measurement.records) == 16
    v = measurement.visibilities
    assert abs(v.v_hv - 0.975) < 1e-6 and abs(v.v_da - 0.88) < 1e-6
    assert abs(measurement.sigma_s - 0.055) < 0.01


def test_settings_offset_reads_fitted_curves():
    scenario = with_overrides(SCENARIO, settings_offset_deg=5.0)
    measurement = actions.measure_chsh(scenario, noiseless=True)
    assert abs(measurement.s - _analytic_s(0.975, 0.88, 0.0, 45.0, -17.5, 27.5)) < 1e-6


def test_da_setting_error_lowers_s():
    scenario = with_overrides(SCENARIO, da_setting_error_deg=3.0)
    measurement = actions.measure_chsh(scenario, noiseless=True)
    assert abs(measurement.s - _analytic_s(0.975, 0.88, 0.0, 48.0, -22.5, 22.5)) < 1e-6
    assert measurement.s < ANALYTIC_S
    # records keep the nominal analyzer label
    assert all(r.setting.theta_signal in (0.0, 90.0, 45.0, 135.0) for r in measurement.records)


def test_missing_curve_is_reported():
    measurement = actions.measure_chsh(SCENARIO, noiseless=True)
    curves = {basis: curve for basis, curve in measurement.curves.items() if basis is not Basis.D}
    try:
        actions.extract_chsh(curves, 0.0, SCENARIO.window, -22.5, 22.5)
    except MissingSettingError:
        return
    raise AssertionError("CHSH without the D curve must raise MissingSettingError")


def test_same_seed_same_measurement():
    first = actions.measure_chsh(SCENARIO, seed=99)
    second = actions.measure_chsh(SCENARIO, seed=99)
    other = actions.measure_chsh(SCENARIO, seed=99, stream_keys=(1,))
    assert first.s == second.s
    assert first.records == second.records
    assert other.s != first.s


def test_chsh_statistics_over_seeded_runs():
    runs = [actions.measure_chsh(SCENARIO, seed=10_000 + i)
            for i in range(200)]
    s = np.array([m.s for m in runs])
    sigma = np.mean([m.sigma_s for m in runs])
    assert abs(s.std(ddof=1) - sigma) / sigma < 0.25
    assert abs(s.mean() - ANALYTIC_S) < 2.0 * sigma
    assert abs(s.mean() - ANALYTIC_S) < 4.0 * sigma / math.sqrt(len(s))


def test_survey_finds_peak_currents():
    generating = SCENARIO.mode_hop_map
    currents, temperatures = (30.0, 31.0, 32.0, 33.0, 34.0, 35.0), (16.0, 18.0)
    surveyed = actions.survey_heatmap(SCENARIO, currents, temperatures, workers=1)
    threaded = actions.survey_heatmap(SCENARIO, currents, temperatures, workers=3)
    assert np.array_equal(surveyed.visibility, threaded.visibility)
    for i, temperature in enumerate(temperatures):
        for j, current in enumerate(currents):
            truth = visibility_at(LaserOperatingPoint(current, temperature), generating)
            assert abs(surveyed.visibility[i, j] - truth) < 0.1, (temperature, current)
        best = optimal_current(temperature, surveyed)
        assert visibility_at(LaserOperatingPoint(best, temperature), generating) == 0.88


def test_survey_grid_validation():
    try:
        actions.survey_heatmap(SCENARIO, (31.0, 30.0), (16.0,))
    except ConfigError:
        return
    raise AssertionError("unsorted survey grid must be rejected")


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "Experiment actions"))
