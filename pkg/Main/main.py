#!/usr/bin/env python3
"""
Entangled photon-pair payload simulator

Batch command line entry point. Every subcommand resolves a scenario
(defaults, then --config file, then flags), runs, and writes plot-ready
files into --out.

Subcommands:
- sweep:    one correlation curve (one arm fixed at H/V/D/A) and its fit
- chsh:     four curves and the CHSH parameter with its propagated error
- geometry: Monte Carlo geometric efficiency (+ optional grid cross-check)
- heatmap:  laser survey of D/A visibility over (temperature, current)
- mission:  thermal + heater simulation with scheduled CHSH measurements

Exit status is 0 on success and 1 on a simulation or configuration error.
"""

import argparse
import sys
from typing import Dict, List, Optional

from config.paths import (
    OUTPUT_DIR,
    SWEEP_CSV,
    CHSH_CSV,
    GEOMETRY_CSV,
    HIT_MAP_CSV,
    HEATMAP_MAP,
    HEATMAP_CSV,
    MISSION_CSV,
    THERMAL_CSV,
    SUMMARY_JSON,
    output_path,
)
from config.scenario_file import ScenarioConfig, config_hash, load_scenario, with_overrides
from config.settings import MC_CHUNK_SAMPLES, OUTPUT_FORMATS
from core import actions
from core.controller import MISSION_COLUMNS, blackout_comparison, mission_run
from core.errors import SimulationError
from core.polarization import qber_from_visibility
from core.state import Arm, Basis
from hardware.detectors import corrected_counts, write_count_records
from hardware.laser import save_mode_hop_map, visibility_at, LaserOperatingPoint
from hardware.optics import (
    EFFICIENCY_COLUMNS,
    HIT_MAP_COLUMNS,
    efficiency_rows,
    estimate_geometric_efficiency,
    grid_efficiency,
    hit_map,
    hit_map_rows,
)
from hardware.thermal import write_thermal_trace
from utils.export import write_csv, write_json
from utils.logger import log, log_error, log_success, set_quiet

THERMAL_EXPORT_EVERY = 6  # one thermal row per minute at the default 10 s step


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="main.py", description="Entangled photon-pair payload simulator")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (flat key = value)")
    common.add_argument("--seed", type=int, help="master seed (non-negative)")
    common.add_argument("--out", default=OUTPUT_DIR, help="output directory")
    common.add_argument("--format", choices=OUTPUT_FORMATS, default="csv",
                        help="csv: tables + summary.json; json: summary.json with rows embedded")
    common.add_argument("--quiet", action="store_true", help="log errors only")
    common.add_argument("--workers", type=int, default=1, help="worker threads for geometry / heatmap")

    sub = parser.add_subparsers(dest="command", required=True)
    sweep = sub.add_parser("sweep", parents=[common], help="one correlation curve")
    sweep.add_argument("--basis", choices=[b.name for b in Basis], default="H")
    sweep.add_argument("--fixed-arm", choices=[a.value for a in Arm], default=Arm.SIGNAL.value)
    sweep.add_argument("--noiseless", action="store_true", help="expected counts instead of Poisson draws")

    chsh = sub.add_parser("chsh", parents=[common], help="CHSH measurement")
    chsh.add_argument("--noiseless", action="store_true")

    geometry = sub.add_parser("geometry", parents=[common], help="geometric efficiency")
    geometry.add_argument("--samples", type=int, default=10 * MC_CHUNK_SAMPLES)
    geometry.add_argument("--grid", action="store_true", help="also run the deterministic grid integration")

    sub.add_parser("heatmap", parents=[common], help="laser visibility survey")

    mission = sub.add_parser("mission", parents=[common], help="full mission scenario")
    mission.add_argument("--duration-h", type=float, help="mission length in hours")
    return parser


def resolve_scenario(args) -> ScenarioConfig:
    scenario = load_scenario(args.config) if args.config else ScenarioConfig()
    if args.seed is not None:
        scenario = with_overrides(scenario, seed=args.seed)
    return scenario


def provenance(scenario: ScenarioConfig, command: str) -> Dict[str, object]:
    return {
        "command": command,
        "seed": scenario.seed,
        "config_hash": config_hash(scenario),
        "mode_hop_map": scenario.mode_hop_map_path,
    }


def _finish(args, scenario: ScenarioConfig, summary: Dict[str, object], tables: List[tuple]):
    """Write tables (csv) or embed them (json), then the summary"""
    summary["provenance"] = provenance(scenario, args.command)
    if args.format == "csv":
        for name, columns, rows in tables:
            write_csv(output_path(args.out, name), columns, rows)
    else:
        summary["tables"] = {name: [{c: row.get(c) for c in columns} for row in rows]
                             for name, columns, rows in tables}
    write_json(output_path(args.out, SUMMARY_JSON), summary)


def _curve_rows(curve: "actions.CorrelationCurve", scenario: ScenarioConfig) -> List[Dict[str, object]]:
    arm, angles = actions.swept_angles_of(curve.records)
    rows = []
    for record, angle in zip(curve.records, angles):
        corrected, _ = corrected_counts(record, scenario.window)
        rows.append({
            "fixed": curve.plan.fixed_setting.name,
            "swept_arm": arm.value,
            "angle_deg": float(angle),
            "t_s": record.integration_time,
            "singles_s": record.singles_signal,
            "singles_i": record.singles_idler,
            "coinc": record.coincidences,
            "coinc_corrected": corrected,
            "fit": float(curve.fit.evaluate(angle)) * record.integration_time if curve.fit else None,
        })
    return rows


CURVE_COLUMNS = ("fixed", "swept_arm", "angle_deg", "t_s", "singles_s", "singles_i",
                 "coinc", "coinc_corrected", "fit")


def _fit_summary(fit: Optional["actions.CorrelationCurveFit"]) -> Optional[Dict[str, float]]:
    if fit is None:
        return None
    return {
        "amplitude_per_s": fit.amplitude, "amplitude_err": fit.amplitude_err,
        "visibility": fit.visibility, "visibility_err": fit.visibility_err,
        "phase_offset_deg": fit.phase_offset, "phase_offset_err": fit.phase_offset_err,
        "residual_norm": fit.residual_norm,
    }


def cmd_sweep(args, scenario: ScenarioConfig) -> int:
    plans = {plan.fixed_setting: plan for plan in actions.chsh_plan(scenario)}
    plan = plans[Basis[args.basis]]
    if args.fixed_arm != plan.fixed_arm.value:
        plan = actions.SweepPlan(Arm(args.fixed_arm), plan.fixed_setting, plan.swept_angles,
                                 plan.integration_time_per_point, plan.max_span_deg, plan.min_points)
    records = actions.run_sweep(scenario, plan, noiseless=args.noiseless)
    fit = actions.fit_curve(records, scenario.window)
    curve = actions.CorrelationCurve(plan, tuple(records), fit)
    summary = {"fixed_arm": plan.fixed_arm.value, "fixed_setting": plan.fixed_setting.name,
               "fit": _fit_summary(fit)}
    _finish(args, scenario, summary, [(SWEEP_CSV, CURVE_COLUMNS, _curve_rows(curve, scenario))])
    log_success(f"Sweep fit: {fit}")
    return 0


def cmd_chsh(args, scenario: ScenarioConfig) -> int:
    measurement = actions.measure_chsh(scenario, noiseless=args.noiseless)
    v = measurement.visibilities
    summary = {
        "S": measurement.s,
        "sigma_S": measurement.sigma_s,
        "correlations": list(measurement.correlations),
        "correlation_errors": list(measurement.correlation_errors),
        "visibilities": {"H": v.v_h, "V": v.v_v, "D": v.v_d, "A": v.v_a} if v else None,
        "qber": qber_from_visibility(v.mean) if v else None,
        "geometric_efficiency": actions.geometric_efficiency(scenario),
        "detected_pairs_per_s": measurement.rates.detected_pairs,
        "laser": str(measurement.point),
        "fits": {basis.name: _fit_summary(curve.fit) for basis, curve in measurement.curves.items()},
    }
    rows = [row for curve in measurement.curves.values() for row in _curve_rows(curve, scenario)]
    _finish(args, scenario, summary, [(CHSH_CSV, CURVE_COLUMNS, rows)])
    if args.format == "csv":
        write_count_records(measurement.records, output_path(args.out, "chsh_points.csv"))
    log_success(f"CHSH: {measurement}")
    return 0


def cmd_geometry(args, scenario: ScenarioConfig) -> int:
    estimate = estimate_geometric_efficiency(scenario.layout, args.samples, scenario.seed, args.workers)
    grid = grid_efficiency(scenario.layout) if args.grid else None
    hits = hit_map(scenario.layout, min(args.samples, MC_CHUNK_SAMPLES), scenario.seed)
    summary = {
        "efficiency": estimate.efficiency,
        "std_error": estimate.std_error,
        "samples": estimate.n_samples,
        "both_hit": estimate.both_hit,
        "signal_only": estimate.only_signal,
        "idler_only": estimate.only_idler,
        "neither": estimate.neither,
        "grid_efficiency": grid.efficiency if grid else None,
        "grid_error": grid.discretization_error if grid else None,
        "opening_angle_density": scenario.layout.opening_angle_density,
        "distance_reference": scenario.layout.distance_reference,
    }
    _finish(args, scenario, summary, [
        (GEOMETRY_CSV, EFFICIENCY_COLUMNS, efficiency_rows(estimate, grid)),
        (HIT_MAP_CSV, HIT_MAP_COLUMNS, hit_map_rows(hits)),
    ])
    log_success(f"Geometric {estimate}")
    return 0


def cmd_heatmap(args, scenario: ScenarioConfig) -> int:
    generating = scenario.mode_hop_map
    surveyed = actions.survey_heatmap(scenario, generating.currents, generating.temperatures,
                                      workers=args.workers)
    rows = [
        {
            "temperature_C": temperature,
            "current_mA": current,
            "visibility": float(surveyed.visibility[i, j]),
            "map_visibility": visibility_at(LaserOperatingPoint(current, temperature), generating),
        }
        for i, temperature in enumerate(surveyed.temperatures)
        for j, current in enumerate(surveyed.currents)
    ]
    summary = {"temperatures_C": list(surveyed.temperatures), "currents_mA": list(surveyed.currents),
               "visibility_min": float(surveyed.visibility.min()),
               "visibility_max": float(surveyed.visibility.max())}
    if args.format == "csv":
        save_mode_hop_map(surveyed, output_path(args.out, HEATMAP_MAP))
    _finish(args, scenario, summary,
            [(HEATMAP_CSV, ("temperature_C", "current_mA", "visibility", "map_visibility"), rows)])
    return 0


def cmd_mission(args, scenario: ScenarioConfig) -> int:
    duration = args.duration_h * 3600.0 if args.duration_h is not None else None
    report = mission_run(scenario, duration)
    summary = report.summary()
    summary["blackout_ks_pvalue"] = blackout_comparison(report)
    _finish(args, scenario, summary, [(MISSION_CSV, MISSION_COLUMNS, report.rows)])
    if args.format == "csv":
        write_thermal_trace(report.trace, output_path(args.out, THERMAL_CSV), every=THERMAL_EXPORT_EVERY)
    return 0


COMMANDS = {
    "sweep": cmd_sweep,
    "chsh": cmd_chsh,
    "geometry": cmd_geometry,
    "heatmap": cmd_heatmap,
    "mission": cmd_mission,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    set_quiet(args.quiet)
    log("=" * 60)
    log(f"PHOTON-PAIR PAYLOAD SIMULATOR: {args.command}")
    log("=" * 60)
    try:
        scenario = resolve_scenario(args)
        return COMMANDS[args.command](args, scenario)
    except SimulationError as e:
        log_error(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        log_error(f"I/O error: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
