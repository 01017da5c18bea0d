#!/usr/bin/env python3
"""
Command line entry point: every subcommand writes its files and exit codes
follow errors.
"""

import os
import sys
import tempfile

from harness import run_tests
from config.paths import GEOMETRY_CSV, GROUND_TEST_SCENARIO, HIT_MAP_CSV, SUMMARY_JSON
from config.settings import HIT_MAP_BINS
from main import main
from utils.export import read_csv, read_json


def _run(*argv):
    tmp = tempfile.mkdtemp(prefix="payload-sim-")
    code = main([*argv, "--out", tmp, "--quiet"])
    return code, tmp


def test_chsh_writes_counts_and_summary():
    code, out = _run("chsh", "--seed", "3")
    assert code == 0
    summary = read_json(os.path.join(out, SUMMARY_JSON))
    assert 2.0 < summary["S"] < 2.0 * 2 ** 0.5
    assert summary["provenance"]["seed"] == 3
    assert len(summary["provenance"]["config_hash"]) == 64
    rows = read_csv(os.path.join(out, "chsh_counts.csv"))
    assert len(rows) == 4 * 13
    assert list(rows[0])[:3] == ["fixed", "swept_arm", "angle_deg"]


def test_json_format_embeds_tables():
    code, out = _run("sweep", "--basis", "D", "--format", "json", "--noiseless")
    assert code == 0
    assert not os.path.exists(os.path.join(out, "sweep.csv"))
    summary = read_json(os.path.join(out, SUMMARY_JSON))
    assert abs(summary["fit"]["visibility"] - 0.88) < 1e-6
    assert len(summary["tables"]["sweep.csv"]) == 13


def test_sweep_with_idler_fixed():
    code, out = _run("sweep", "--basis", "H", "--fixed-arm", "idler")
    assert code == 0
    rows = read_csv(os.path.join(out, "sweep.csv"))
    assert {row["swept_arm"] for row in rows} == {"signal"}


def test_same_seed_same_files():
    _, first = _run("chsh", "--seed", "8")
    _, second = _run("chsh", "--seed", "8")
    assert read_csv(os.path.join(first, "chsh_counts.csv")) == read_csv(os.path.join(second, "chsh_counts.csv"))


def test_geometry_subcommand():
    code, out = _run("geometry", "--samples", "20000", "--workers", "2")
    assert code == 0
    summary = read_json(os.path.join(out, SUMMARY_JSON))
    assert summary["samples"] == 20000
    assert summary["both_hit"] + summary["signal_only"] + summary["idler_only"] + summary["neither"] == 20000
    assert os.path.exists(os.path.join(out, "hit_map.csv"))


def test_geometry_json_embeds_tables():
    code, out = _run("geometry", "--samples", "20000", "--format", "json")
    assert code == 0
    assert not os.path.exists(os.path.join(out, GEOMETRY_CSV))
    assert not os.path.exists(os.path.join(out, HIT_MAP_CSV))
    summary = read_json(os.path.join(out, SUMMARY_JSON))
    buckets = summary["tables"][GEOMETRY_CSV]
    assert [row["bucket"] for row in buckets[:5]] == ["both", "signal_only", "idler_only", "neither", "std_error"]
    assert buckets[0]["count"] == summary["both_hit"]
    cells = summary["tables"][HIT_MAP_CSV]
    assert len(cells) == HIT_MAP_BINS ** 2
    assert sum(cell["signal"] for cell in cells) <= 20000
    assert summary["provenance"]["command"] == "geometry"


def test_heatmap_on_ground_test_map():
    code, out = _run("heatmap", "--config", GROUND_TEST_SCENARIO, "--workers", "2")
    assert code == 0
    rows = read_csv(os.path.join(out, "heatmap.csv"))
    assert len(rows) == 2 * 5
    assert all(abs(float(row["visibility"]) - 0.97) < 0.1 for row in rows)
    assert os.path.exists(os.path.join(out, "mode_hop_map.txt"))


def test_short_mission_subcommand():
    code, out = _run("mission", "--duration-h", "12")
    assert code == 0
    summary = read_json(os.path.join(out, SUMMARY_JSON))
    assert summary["attempted"] == 8
    assert len(read_csv(os.path.join(out, "mission.csv"))) == summary["measured"]
    assert os.path.exists(os.path.join(out, "thermal.csv"))


def test_config_errors_exit_with_status_one():
    with tempfile.TemporaryDirectory() as tmp:
        bad = os.path.join(tmp, "bad.scenario")
        with open(bad, "w", encoding="utf-8") as handle:
            handle.write("unknown_key = 1\n")
        code, _ = _run("chsh", "--config", bad)
    assert code == 1
    code, _ = _run("chsh", "--config", "/nonexistent.scenario")
    assert code == 1


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "Command line"))
