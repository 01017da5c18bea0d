"""
Single-photon detectors and the coincidence unit.

Poisson count statistics with dark counts, accidental coincidences in a
fixed window, accidental-corrected visibilities and the temperature
tracked GM-APD bias.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from config.settings import (
    DETECTOR_EFFICIENCY,
    DARK_COUNT_RATE_PER_S,
    DETECTOR_ACTIVE_DIAMETER_UM,
    BREAKDOWN_VOLTAGE_AT_REF_V,
    BREAKDOWN_VOLTAGE_SLOPE_V_PER_C,
    NOMINAL_OVERVOLTAGE_V,
    DETECTOR_REFERENCE_TEMPERATURE_C,
    EFFICIENCY_LOSS_PER_C,
    BIAS_TEMPERATURE_RANGE_C,
    COINCIDENCE_WINDOW_NS,
)
from core.errors import ConfigError, ZeroTotalError
from core.state import AnalyzerSetting, CountRecord
from utils.export import read_csv, write_csv
from utils.logger import log_warning
from utils.seeds import get_rng

COUNT_RECORD_COLUMNS = ("setting_signal_deg", "setting_idler_deg", "t_s", "singles_s", "singles_i", "coinc")


@dataclass(frozen=True)
class DetectorConfig:
    """GM-APD pair (identical channels)"""
    efficiency: float = DETECTOR_EFFICIENCY
    dark_count_rate: float = DARK_COUNT_RATE_PER_S  # per detector, counts/s
    active_diameter_um: float = DETECTOR_ACTIVE_DIAMETER_UM
    breakdown_voltage_at_ref: float = BREAKDOWN_VOLTAGE_AT_REF_V
    breakdown_voltage_slope: float = BREAKDOWN_VOLTAGE_SLOPE_V_PER_C
    nominal_overvoltage: float = NOMINAL_OVERVOLTAGE_V
    reference_temperature_c: float = DETECTOR_REFERENCE_TEMPERATURE_C
    efficiency_loss_per_c: float = EFFICIENCY_LOSS_PER_C
    bias_tracking: bool = True

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigError(f"efficiency={self.efficiency} outside [0, 1]")
        if self.dark_count_rate < 0 or self.efficiency_loss_per_c < 0:
            raise ConfigError("dark_count_rate and efficiency_loss_per_c must be >= 0")
        if self.active_diameter_um <= 0:
            raise ConfigError(f"active_diameter_um must be > 0, got {self.active_diameter_um}")


@dataclass(frozen=True)
class CoincidenceWindow:
    tau_ns: float = COINCIDENCE_WINDOW_NS

    def __post_init__(self):
        if self.tau_ns <= 0:
            raise ConfigError(f"Coincidence window must be > 0 ns, got {self.tau_ns}")

    @property
    def tau_s(self) -> float:
        return self.tau_ns * 1e-9


@dataclass(frozen=True)
class CorrectedVisibility:
    """Accidental-corrected contrast; clamped is set when a corrected count went negative"""
    visibility: float
    std_error: float
    clamped: bool


def accidental_rate(s1: float, s2: float, window: CoincidenceWindow) -> float:
    """Expected accidental coincidences/s of two uncorrelated streams: s1 * s2 * tau"""
    if s1 < 0 or s2 < 0:
        raise ConfigError(f"Singles rates must be >= 0, got {s1}, {s2}")
    return s1 * s2 * window.tau_s


def simulate_counts(true_coincidence_rate: float, singles_rates: Tuple[float, float],
                    config: DetectorConfig, window: CoincidenceWindow, integration_time: float,
                    seed, setting: Optional[AnalyzerSetting] = None) -> CountRecord:
    """Poisson counts for one integration.

    Coincidences ~ Poisson((true + accidental) * t). Each singles channel is
    the coincidence count plus an independent Poisson excess, so its mean is
    (singles_rate + dark) * t and it never falls below the coincidences.
    `seed` is an int or a derived SeedSequence.
    """
    s1, s2 = singles_rates
    if min(true_coincidence_rate, s1, s2) < 0:
        raise ConfigError("Rates must be >= 0")
    if integration_time <= 0:
        raise ConfigError(f"integration_time must be > 0, got {integration_time}")

    rng = get_rng(seed)
    total_s1 = s1 + config.dark_count_rate
    total_s2 = s2 + config.dark_count_rate
    coincidence_mean = (true_coincidence_rate + accidental_rate(total_s1, total_s2, window)) * integration_time
    coincidences = rng.poisson(coincidence_mean)
    singles = [
        coincidences + rng.poisson(max(0.0, total * integration_time - coincidence_mean))
        for total in (total_s1, total_s2)
    ]
    return CountRecord(
        singles_signal=float(singles[0]),
        singles_idler=float(singles[1]),
        coincidences=float(coincidences),
        integration_time=integration_time,
        setting=setting if setting is not None else AnalyzerSetting(0.0, 0.0),
    )


def expected_accidentals(record: CountRecord, window: CoincidenceWindow) -> float:
    """Accidental counts expected in this record from its own singles"""
    s1, s2 = record.singles_rates
    return accidental_rate(s1, s2, window) * record.integration_time


def corrected_counts(record: CountRecord, window: CoincidenceWindow) -> Tuple[float, bool]:
    """(coincidences - expected accidentals) clamped at 0, and whether it was clamped"""
    corrected = record.coincidences - expected_accidentals(record, window)
    return max(0.0, corrected), corrected < 0.0


def corrected_visibility(max_record: CountRecord, min_record: CountRecord,
                         window: CoincidenceWindow) -> CorrectedVisibility:
    if not math.isclose(max_record.integration_time, min_record.integration_time, rel_tol=1e-12):
        raise ConfigError("Records must share one integration time")
    c_max, clamped_max = corrected_counts(max_record, window)
    c_min, clamped_min = corrected_counts(min_record, window)
    total = c_max + c_min
    if total == 0:
        raise ZeroTotalError("Corrected visibility undefined: both corrected counts are 0")
    if clamped_max or clamped_min:
        log_warning(f"Accidental correction clamped a negative count at "
                    f"{max_record.setting if clamped_max else min_record.setting}")

    # First order, Poisson variance of the raw counts
    d_max = 2.0 * c_min / total ** 2
    d_min = -2.0 * c_max / total ** 2
    variance = d_max ** 2 * max_record.coincidences + d_min ** 2 * min_record.coincidences
    return CorrectedVisibility((c_max - c_min) / total, math.sqrt(variance), clamped_max or clamped_min)


def bias_voltage(temperature: float, config: DetectorConfig) -> float:
    """Breakdown voltage (linear in T) plus the nominal overvoltage"""
    low, high = BIAS_TEMPERATURE_RANGE_C
    if not low <= temperature <= high:
        raise ConfigError(f"Detector temperature {temperature}°C outside {low}..{high}°C")
    breakdown = (config.breakdown_voltage_at_ref
                 + config.breakdown_voltage_slope * (temperature - config.reference_temperature_c))
    return breakdown + config.nominal_overvoltage


def effective_efficiency(temperature: float, config: DetectorConfig,
                         tracking: Optional[bool] = None) -> float:
    """Detection efficiency at this temperature.

    With bias tracking the overvoltage is held and the efficiency is
    constant. Without it the bias stays at its reference value and the
    efficiency drops by efficiency_loss_per_c per degree of offset.
    """
    tracking = config.bias_tracking if tracking is None else tracking
    if tracking:
        bias_voltage(temperature, config)  # range check
        return config.efficiency
    offset = abs(bias_voltage(temperature, config) - bias_voltage(config.reference_temperature_c, config))
    degrees = offset / config.breakdown_voltage_slope if config.breakdown_voltage_slope else 0.0
    return config.efficiency * max(0.0, 1.0 - config.efficiency_loss_per_c * degrees)


def _poisson_arrivals(rate: float, duration: float, rng: np.random.Generator) -> np.ndarray:
    n_hits = rng.poisson(rate * duration)
    return np.sort(rng.uniform(0.0, duration, n_hits))


def empirical_accidental_rate(s1: float, s2: float, window: CoincidenceWindow,
                              duration: float, seed) -> float:
    """Coincidences/s between two independent time-tag streams (|t1 - t2| <= tau/2)"""
    if duration <= 0:
        raise ConfigError(f"duration must be > 0, got {duration}")
    rng = get_rng(seed)
    tags_1 = _poisson_arrivals(s1, duration, rng)
    tags_2 = _poisson_arrivals(s2, duration, rng)
    half = 0.5 * window.tau_s
    upper = np.searchsorted(tags_2, tags_1 + half, side="right")
    lower = np.searchsorted(tags_2, tags_1 - half, side="left")
    return float(np.sum(upper - lower)) / duration


def write_count_records(records: Iterable[CountRecord], path: str) -> int:
    rows = (
        {
            "setting_signal_deg": r.setting.theta_signal,
            "setting_idler_deg": r.setting.theta_idler,
            "t_s": r.integration_time,
            "singles_s": r.singles_signal,
            "singles_i": r.singles_idler,
            "coinc": r.coincidences,
        }
        for r in records
    )
    return write_csv(path, COUNT_RECORD_COLUMNS, rows)


def read_count_records(path: str) -> List[CountRecord]:
    records = []
    for number, row in enumerate(read_csv(path), start=2):
        try:
            records.append(CountRecord(
                singles_signal=float(row["singles_s"]),
                singles_idler=float(row["singles_i"]),
                coincidences=float(row["coinc"]),
                integration_time=float(row["t_s"]),
                setting=AnalyzerSetting(float(row["setting_signal_deg"]), float(row["setting_idler_deg"])),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"{path}:{number}: bad count record ({e})") from e
    return records
