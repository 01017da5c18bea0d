"""
CSV / JSON writers for plot-ready result files
"""

import csv
import json
import math
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from utils.logger import log_success


def _plain(value: Any) -> Any:
    """numpy scalars / arrays / enums -> JSON-friendly values"""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "value") and hasattr(value, "name"):  # Enum
        return value.value
    return value


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> int:
    """Write rows in a fixed column order; returns the number of rows written"""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _plain(row.get(key)) for key in columns})
            count += 1
    log_success(f"Wrote {count} rows to {path}")
    return count


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_json(path: str, payload: Dict[str, Any]):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_plain(payload), handle, indent=2, sort_keys=True)
        handle.write("\n")
    log_success(f"Wrote summary to {path}")


def read_json(path: str) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
