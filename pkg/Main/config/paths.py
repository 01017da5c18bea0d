"""
Central paths for run outputs and bundled data files
"""

import os

# Base directory (Main folder)
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# Bundled inputs
DATA_DIR = os.path.join(BASE_DIR, "data")
IN_ORBIT_SCENARIO = os.path.join(DATA_DIR, "in_orbit.scenario")
GROUND_TEST_SCENARIO = os.path.join(DATA_DIR, "ground_test.scenario")

# Default output root; --out overrides it
OUTPUT_DIR = os.path.join(BASE_DIR, "local_files", "runs")

# File names inside an output directory, one set per subcommand
SWEEP_CSV = "sweep.csv"
CHSH_CSV = "chsh_counts.csv"
GEOMETRY_CSV = "geometry.csv"
HIT_MAP_CSV = "hit_map.csv"
HEATMAP_MAP = "mode_hop_map.txt"
HEATMAP_CSV = "heatmap.csv"
MISSION_CSV = "mission.csv"
THERMAL_CSV = "thermal.csv"
SUMMARY_JSON = "summary.json"


def output_path(out_dir: str, name: str) -> str:
    """Join an output file name onto a run directory, creating the directory"""
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)
