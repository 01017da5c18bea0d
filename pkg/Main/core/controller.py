"""
Mission controller: steps the thermal model through the mission and runs
a CHSH measurement at every scheduled epoch where the payload can operate.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import ks_2samp

from config.scenario_file import ScenarioConfig
from core import actions
from core.errors import OutOfGridError, SimulationError
from core.state import Illumination, ThermalState
from hardware.laser import LaserOperatingPoint, optimal_current
from hardware.thermal import can_operate, heater_on_intervals, simulate_thermal
from utils.logger import log, log_mission, log_warning, log_success
from utils.run_health import RunHealth, StageHealth
from utils.seeds import STREAM_MISSION

MISSION_COLUMNS = (
    "epoch", "time_s", "time_h", "temperature_C", "current_mA", "post_blackout",
    "S", "sigma_S", "v_h", "v_v", "v_d", "v_a",
    "pump_power_mW", "detected_pairs_per_s", "singles_per_s", "accidentals_per_s",
)


@dataclass
class MissionReport:
    """Measurement rows plus the thermal trace and epoch bookkeeping"""
    rows: List[Dict[str, object]] = field(default_factory=list)
    trace: List[ThermalState] = field(default_factory=list)
    attempted: int = 0
    measured: int = 0
    inoperable: int = 0  # outside the band or in a full-sun blackout
    unsettled: int = 0   # operable but not yet settled inside the map range
    failed: int = 0      # laser or measurement errors
    blackout_intervals_s: List[Tuple[float, float]] = field(default_factory=list)
    health: Dict[str, StageHealth] = field(default_factory=dict)

    def s_values(self, post_blackout: Optional[bool] = None) -> np.ndarray:
        return np.array([row["S"] for row in self.rows
                         if post_blackout is None or row["post_blackout"] == post_blackout])

    def heater_cycles(self) -> List[Tuple[float, float]]:
        return heater_on_intervals(self.trace)

    def summary(self) -> Dict[str, object]:
        s = self.s_values()
        temperatures = [row["temperature_C"] for row in self.rows]
        return {
            "attempted": self.attempted,
            "measured": self.measured,
            "inoperable": self.inoperable,
            "unsettled": self.unsettled,
            "failed": self.failed,
            "S_mean": float(s.mean()) if len(s) else None,
            "S_std": float(s.std(ddof=1)) if len(s) > 1 else None,
            "temperature_range_C": [min(temperatures), max(temperatures)] if temperatures else None,
            "heater_cycles": len(self.heater_cycles()),
            "blackout_intervals_s": self.blackout_intervals_s,
            "health": {name: h.status.value for name, h in self.health.items()},
        }


class MissionController:
    """Sequences thermal simulation and measurements for one scenario"""

    def __init__(self, scenario: ScenarioConfig, health: Optional[RunHealth] = None):
        self.scenario = scenario
        self.health = health or RunHealth()
        self._laser = self.health.register("laser", log_interval_s=scenario.measurement_interval_s * 4)
        self._chsh = self.health.register("chsh", log_interval_s=scenario.measurement_interval_s * 4)

    def _settled_since(self, trace: List[ThermalState]) -> np.ndarray:
        """Per trace index: time since the payload last left the map range or was in full sun"""
        mode_map = self.scenario.mode_hop_map
        since = np.empty(len(trace))
        start = None
        for index, state in enumerate(trace):
            ok = (mode_map.contains_temperature(state.payload_temperature)
                  and state.illumination is not Illumination.FULL_SUN_PERIOD)
            if not ok:
                start = None
                since[index] = -1.0
                continue
            if start is None:
                start = state.time
            since[index] = state.time - start
        return since

    def _post_blackout(self, t: float) -> bool:
        return any(t >= end for _, end in self.scenario.orbit.full_sun_intervals_s)

    def run(self, duration: Optional[float] = None) -> MissionReport:
        scenario = self.scenario
        duration = scenario.mission_duration_s if duration is None else duration
        log("=" * 60)
        log_mission(f"Mission start: {duration / 86400.0:.2f} days, seed={scenario.seed}")
        log("=" * 60)

        trace = simulate_thermal(scenario.orbit, scenario.heater, duration,
                                 scenario.thermal_step_s, scenario.initial_temperature_c)
        settled = self._settled_since(trace)
        report = MissionReport(trace=trace, blackout_intervals_s=scenario.orbit.full_sun_intervals_s)

        epochs = int(math.floor(duration / scenario.measurement_interval_s + 1e-9))
        for epoch in range(1, epochs + 1):
            t = epoch * scenario.measurement_interval_s
            index = min(len(trace) - 1, int(round(t / scenario.thermal_step_s)))
            state = trace[index]
            report.attempted += 1

            if not can_operate(state, scenario.heater):
                report.inoperable += 1
                continue
            if settled[index] < scenario.settle_time_s:
                report.unsettled += 1
                continue

            try:
                current = optimal_current(state.payload_temperature, scenario.mode_hop_map)
                self._laser.report_success(t)
            except OutOfGridError as e:
                report.failed += 1
                if self._laser.report_error(e, t):
                    log_warning(f"Epoch {epoch}: no laser setting ({e})")
                continue

            point = LaserOperatingPoint(current, state.payload_temperature)
            try:
                measurement = actions.measure_chsh(scenario, state, scenario.seed, (STREAM_MISSION, epoch), point)
                self._chsh.report_success(t)
            except SimulationError as e:
                report.failed += 1
                if self._chsh.report_error(e, t):
                    log_warning(f"Epoch {epoch}: measurement failed ({e})")
                if self._chsh.is_failed():
                    self._chsh.log_failure_once("CHSH measurements failing at every epoch")
                continue

            report.measured += 1
            report.rows.append(self._row(epoch, state, point, measurement))

        report.health = self.health.get_all_status()
        log_success(f"Mission done: {report.measured}/{report.attempted} epochs measured "
                    f"({report.inoperable} inoperable, {report.unsettled} settling, {report.failed} failed)")
        return report

    def _row(self, epoch: int, state: ThermalState, point: LaserOperatingPoint,
             measurement: "actions.ChshMeasurement") -> Dict[str, object]:
        v = measurement.visibilities
        rates = measurement.rates
        row = {
            "epoch": epoch,
            "time_s": state.time,
            "time_h": state.time / 3600.0,
            "temperature_C": state.payload_temperature,
            "current_mA": point.current,
            "post_blackout": self._post_blackout(state.time),
            "S": measurement.s,
            "sigma_S": measurement.sigma_s,
            "v_h": v.v_h if v else None,
            "v_v": v.v_v if v else None,
            "v_d": v.v_d if v else None,
            "v_a": v.v_a if v else None,
            "pump_power_mW": rates.pump_power_mw,
            "detected_pairs_per_s": rates.detected_pairs,
            "singles_per_s": rates.singles,
            "accidentals_per_s": rates.accidentals,
        }
        log_mission(f"Epoch {epoch} t={state.time / 3600.0:.1f}h T={state.payload_temperature:.2f}°C "
                    f"I={point.current:.0f}mA {measurement}")
        return row


def mission_run(scenario: ScenarioConfig, duration: Optional[float] = None) -> MissionReport:
    return MissionController(scenario).run(duration)


def blackout_comparison(report: MissionReport) -> Optional[float]:
    """Two-sample KS p-value of S before vs after the full-sun blackout (None if a side is empty)"""
    before, after = report.s_values(False), report.s_values(True)
    if len(before) < 2 or len(after) < 2:
        return None
    return float(ks_2samp(before, after).pvalue)
