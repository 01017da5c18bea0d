#!/usr/bin/env python3
"""
Scenario files: parsing, shared keys, aliases, hashing and the bundled scenarios.
"""

import os
import sys
import tempfile

from harness import run_tests
from config.paths import GROUND_TEST_SCENARIO, IN_ORBIT_SCENARIO
from config.scenario_file import (
    ScenarioConfig,
    build_scenario,
    config_hash,
    dump_scenario,
    load_scenario,
    read_scenario_file,
    with_overrides,
)
from core.errors import ConfigError


def _write(tmp: str, text: str, name: str = "test.scenario") -> str:
    path = os.path.join(tmp, name)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def _rejects(text: str):
    with tempfile.TemporaryDirectory() as tmp:
        try:
            load_scenario(_write(tmp, text))
        except ConfigError:
            return
    raise AssertionError(f"scenario {text!r} must be rejected")


def test_in_orbit_scenario_equals_defaults():
    assert config_hash(load_scenario(IN_ORBIT_SCENARIO)) == config_hash(ScenarioConfig())


def test_ground_test_scenario():
    scenario = load_scenario(GROUND_TEST_SCENARIO)
    assert scenario.laser_current_ma == 30.0
    assert scenario.operating_temperature_c == 20.0
    assert scenario.source.intrinsic_visibility_hv == 0.97
    assert scenario.orbit.full_sun_intervals_h == ()
    assert scenario.mode_hop_map.currents == (30.0, 31.0, 32.0, 33.0, 34.0)
    assert os.path.isabs(scenario.mode_hop_map_path)


def test_shared_key_sets_every_section():
    scenario = build_scenario({"crystal_length_mm": "8", "wavelength_split_nm": "40"})
    assert scenario.source.crystal_length_mm == 8.0
    assert scenario.layout.crystal_length_mm == 8.0
    assert scenario.source.wavelength_split_nm == scenario.layout.wavelength_split_nm == 40.0


def test_aliases_and_types():
    scenario = build_scenario({
        "detector_efficiency": "0.5",
        "coincidence_window_ns": "2.0",
        "heater_enabled": "off",
        "bias_tracking": "no",
        "full_sun_intervals_h": "10-20, 30.5-40",
        "min_sweep_points": "6",
        "laser_current_ma": "none",
        "opening_angle_density": "angle",
    })
    assert scenario.detector.efficiency == 0.5
    assert scenario.window.tau_ns == 2.0
    assert scenario.heater.enabled is False
    assert scenario.detector.bias_tracking is False
    assert scenario.orbit.full_sun_intervals_h == ((10.0, 20.0), (30.5, 40.0))
    assert scenario.min_sweep_points == 6
    assert scenario.laser_current_ma is None
    assert scenario.layout.opening_angle_density == "angle"


def test_bad_files_rejected():
    _rejects("efficiency = 0.5\n")  # generic name needs its alias
    _rejects("no_such_key = 1\n")
    _rejects("seed = 1\nseed = 2\n")
    _rejects("seed\n")
    _rejects("detector_distance_mm = far\n")
    _rejects("heater_enabled = maybe\n")
    _rejects("full_sun_intervals_h = 10\n")
    _rejects("geometric_efficiency = 1.5\n")
    _rejects("band_low_c = 30\n")


def test_missing_file_is_a_config_error():
    try:
        read_scenario_file("/nonexistent/path.scenario")
    except ConfigError:
        return
    raise AssertionError("missing scenario file must raise ConfigError")


def test_comments_and_blank_lines():
    with tempfile.TemporaryDirectory() as tmp:
        values = read_scenario_file(_write(tmp, "# header\n\nseed = 5  # trailing\n"))
    assert values == {"seed": "5"}


def test_dump_reloads_to_same_hash():
    scenario = build_scenario({"crystal_length_mm": "8", "heater_power_w": "3.25",
                               "full_sun_intervals_h": "1-2", "seed": "11"})
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "resolved.scenario")
        dump_scenario(scenario, path)
        assert config_hash(load_scenario(path)) == config_hash(scenario)


def test_hash_tracks_every_change():
    base = ScenarioConfig()
    assert config_hash(base) == config_hash(ScenarioConfig())
    assert config_hash(with_overrides(base, seed=1)) != config_hash(base)
    assert config_hash(build_scenario({"detector_distance_mm": "101"})) != config_hash(base)
    ground = load_scenario(GROUND_TEST_SCENARIO)
    assert config_hash(ground) != config_hash(base)


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "Scenario files"))
