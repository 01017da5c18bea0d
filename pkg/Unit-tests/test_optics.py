#!/usr/bin/env python3
"""
Lens-free collection geometry: ray sampling, refraction, hit classification,
Monte Carlo efficiency against the deterministic grid.
"""

import dataclasses
import math
import os
import sys
import tempfile

import numpy as np

from harness import run_tests
from core.errors import ConfigError
from core.state import HitOutcome
from hardware.optics import (
    FWHM_TO_SIGMA,
    OpticalLayout,
    RayPair,
    efficiency_rows,
    estimate_geometric_efficiency,
    exit_angle,
    grid_efficiency,
    hit_map,
    hit_map_rows,
    refract_at_exit,
    sample_ray_batch,
    sample_ray_pair,
    trace_to_detector,
    write_efficiency_table,
    write_hit_map,
)
from utils.export import read_csv

SEED = 7
LAYOUT = OpticalLayout()


def _axis_pair(theta_in: float, y_um: float = 0.0, signal_azimuth: float = 0.0) -> RayPair:
    c, s = math.cos(theta_in), math.sin(theta_in)
    ca, sa = math.cos(signal_azimuth), math.sin(signal_azimuth)
    return RayPair(
        birth_position=(0.5 * LAYOUT.crystal_length_mm, y_um, 0.0),
        signal_direction=np.array([c, s * ca, s * sa]),
        idler_direction=np.array([c, -s * ca, -s * sa]),
        signal_wavelength=760.0,
        idler_wavelength=867.0,
    )


def test_collinear_limit_points_along_axis():
    layout = OpticalLayout(max_opening_angle_deg=0.0)
    pair = sample_ray_pair(layout, np.random.default_rng(SEED))
    assert np.array_equal(pair.signal_direction, [1.0, 0.0, 0.0])
    assert np.array_equal(pair.idler_direction, [1.0, 0.0, 0.0])


def test_sampled_pairs_are_antisymmetric_unit_vectors():
    rng = np.random.default_rng(SEED)
    for _ in range(200):
        pair = sample_ray_pair(LAYOUT, rng)
        assert abs(np.linalg.norm(pair.signal_direction) - 1.0) < 1e-12
        assert abs(np.linalg.norm(pair.idler_direction) - 1.0) < 1e-12
        assert np.allclose(pair.signal_direction[1:], -pair.idler_direction[1:], atol=1e-12)
        assert 0.0 <= pair.birth_position[0] <= LAYOUT.crystal_length_mm
        assert abs(1.0 / pair.signal_wavelength + 1.0 / pair.idler_wavelength - 1.0 / 405.0) < 1e-12


def test_transverse_spread_matches_pump_fwhm():
    batch = sample_ray_batch(LAYOUT, 1_000_000, np.random.default_rng(SEED))
    fwhm_y = np.std(batch.y_um) / FWHM_TO_SIGMA
    fwhm_z = np.std(batch.z_um) / FWHM_TO_SIGMA
    assert abs(fwhm_y - 800.0) / 800.0 < 0.02
    assert abs(fwhm_z - 400.0) / 400.0 < 0.02
    assert np.max(batch.theta_rad) <= math.radians(0.3)


def test_snell_refraction():
    assert np.array_equal(refract_at_exit(np.array([1.0, 0.0, 0.0]), 0.0, LAYOUT), [1.0, 0.0, 0.0])
    theta_out = math.degrees(float(exit_angle(math.radians(0.3), 1.66)))
    assert abs(theta_out - 0.498) < 1e-3
    assert abs(float(exit_angle(1e-6, 1.66)) / 1e-6 - 1.66) < 1e-6
    out = refract_at_exit(_axis_pair(math.radians(0.3)).signal_direction, math.radians(0.3), LAYOUT)
    assert abs(np.linalg.norm(out) - 1.0) < 1e-12
    assert abs(math.degrees(math.acos(out[0])) - theta_out) < 1e-9


def test_refraction_uses_given_internal_angle_and_keeps_azimuth():
    # direction fixes the azimuth only; the tilt comes from internal_angle
    azimuth = math.radians(40.0)
    direction = _axis_pair(math.radians(0.1), signal_azimuth=azimuth).signal_direction
    for internal_deg in (0.2, 0.5, 1.0):
        out = refract_at_exit(direction, math.radians(internal_deg), LAYOUT)
        expected = math.degrees(float(exit_angle(math.radians(internal_deg), LAYOUT.crystal_refractive_index)))
        assert abs(math.degrees(math.acos(out[0])) - expected) < 1e-9
        assert abs(math.atan2(out[2], out[1]) - azimuth) < 1e-12
    try:
        refract_at_exit(np.array([1.0, 0.0, 0.0]), math.radians(0.3), LAYOUT)
    except ConfigError:
        pass
    else:
        raise AssertionError("on-axis direction with a tilt has no azimuth")


def test_on_axis_pair_hits_both():
    assert trace_to_detector(_axis_pair(0.0), LAYOUT) is HitOutcome.BOTH


def test_wide_pair_misses_both():
    # ~860 um radial displacement against a 250 um radius
    assert trace_to_detector(_axis_pair(math.radians(0.3)), LAYOUT) is HitOutcome.NEITHER


def test_offset_pair_hits_signal_only():
    # Born 300 um off axis; the signal heads back towards the centre, the idler away
    theta_in = math.radians(0.036)
    assert trace_to_detector(_axis_pair(theta_in, y_um=300.0, signal_azimuth=math.pi), LAYOUT) \
        is HitOutcome.SIGNAL_ONLY
    assert trace_to_detector(_axis_pair(theta_in, y_um=300.0, signal_azimuth=0.0), LAYOUT) \
        is HitOutcome.IDLER_ONLY


def test_default_layout_efficiency_within_published_bound():
    estimate = estimate_geometric_efficiency(LAYOUT, 1_000_000, SEED)
    assert 0.001 < estimate.efficiency <= 0.04
    assert estimate.both_hit + estimate.only_signal + estimate.only_idler + estimate.neither == 1_000_000
    assert estimate.efficiency == estimate.both_hit / estimate.n_samples
    assert estimate.both_hit <= min(estimate.both_hit + estimate.only_signal,
                                    estimate.both_hit + estimate.only_idler)


def test_uniform_in_angle_density_exceeds_published_bound():
    angle = dataclasses.replace(LAYOUT, opening_angle_density="angle")
    estimate = estimate_geometric_efficiency(angle, 200_000, SEED)
    assert estimate.efficiency > 0.04
    assert abs(estimate.efficiency - 0.055) < 0.004


def test_same_seed_is_bit_identical_for_any_worker_count():
    serial = estimate_geometric_efficiency(LAYOUT, 50_000, SEED, workers=1, chunk_samples=10_000)
    again = estimate_geometric_efficiency(LAYOUT, 50_000, SEED, workers=1, chunk_samples=10_000)
    parallel = estimate_geometric_efficiency(LAYOUT, 50_000, SEED, workers=4, chunk_samples=10_000)
    assert serial == again == parallel


def test_trivial_layouts():
    huge = OpticalLayout(active_diameter_um=1e6)
    assert estimate_geometric_efficiency(huge, 20_000, SEED).efficiency == 1.0
    point = OpticalLayout(max_opening_angle_deg=0.0, beam_fwhm_x_um=0.0, beam_fwhm_y_um=0.0)
    assert estimate_geometric_efficiency(point, 20_000, SEED).efficiency == 1.0


def test_efficiency_ladders_are_monotonic():
    def interval(layout):
        e = estimate_geometric_efficiency(layout, 200_000, SEED)
        return e.efficiency - 3.0 * e.std_error, e.efficiency + 3.0 * e.std_error

    by_diameter = [interval(dataclasses.replace(LAYOUT, active_diameter_um=d)) for d in (300.0, 500.0, 1000.0)]
    for smaller, larger in zip(by_diameter, by_diameter[1:]):
        assert smaller[1] < larger[0]
    by_angle = [interval(dataclasses.replace(LAYOUT, max_opening_angle_deg=a)) for a in (0.1, 0.3, 0.6)]
    for narrow, wide in zip(by_angle, by_angle[1:]):
        assert wide[1] < narrow[0]


def test_monte_carlo_agrees_with_grid_integration():
    estimate = estimate_geometric_efficiency(LAYOUT, 1_000_000, SEED)
    grid = grid_efficiency(LAYOUT, n_angle=192)
    tolerance = 3.0 * math.hypot(estimate.std_error, grid.discretization_error)
    assert abs(estimate.efficiency - grid.efficiency) <= tolerance, (estimate, grid)


def test_too_few_samples_rejected():
    try:
        estimate_geometric_efficiency(LAYOUT, 999, SEED)
    except ConfigError:
        return
    raise AssertionError("n_samples below the minimum must be rejected")


def test_layout_validation():
    for bad in ({"max_opening_angle_deg": 90.0}, {"active_diameter_um": 0.0},
                {"opening_angle_density": "cosine"}, {"detector_distance_mm": -1.0}):
        try:
            OpticalLayout(**bad)
        except ConfigError:
            continue
        raise AssertionError(f"{bad} must be rejected")


def test_exported_tables():
    estimate = estimate_geometric_efficiency(LAYOUT, 20_000, SEED)
    grid = hit_map(LAYOUT, 20_000, SEED, bins=16)
    assert np.all(grid.coincidence_counts <= grid.signal_counts)
    assert grid.signal_counts.sum() <= 20_000
    with tempfile.TemporaryDirectory() as tmp:
        table = os.path.join(tmp, "geometry.csv")
        assert write_efficiency_table(estimate, table) == 5
        rows = read_csv(table)
        assert [row["bucket"] for row in rows[:4]] == ["both", "signal_only", "idler_only", "neither"]
        assert int(rows[0]["count"]) == estimate.both_hit
        assert rows[4]["bucket"] == "std_error"
        assert write_hit_map(grid, os.path.join(tmp, "hit_map.csv")) == 16 * 16


def test_table_rows_carry_grid_result_and_bin_counts():
    estimate = estimate_geometric_efficiency(LAYOUT, 20_000, SEED)
    grid = grid_efficiency(LAYOUT, n_axial=2, n_transverse=16, n_angle=16, n_azimuth=8)
    rows = efficiency_rows(estimate, grid)
    assert [row["bucket"] for row in rows] == ["both", "signal_only", "idler_only", "neither", "std_error", "grid"]
    assert sum(row["count"] for row in rows[:4]) == estimate.n_samples
    assert rows[-1]["fraction"] == grid.efficiency
    hits = hit_map(LAYOUT, 20_000, SEED, bins=16)
    cells = hit_map_rows(hits)
    assert len(cells) == 16 * 16
    assert sum(cell["signal"] for cell in cells) == int(hits.signal_counts.sum())
    assert sum(cell["coincidence"] for cell in cells) == int(hits.coincidence_counts.sum())


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "Collection geometry"))
