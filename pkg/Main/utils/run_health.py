"""
Failure tracking for long simulation runs.

Each mission stage (laser current selection, CHSH measurement) gets a
tracker that counts its error streak, marks the stage degraded or failed,
and throttles repeated log lines. Throttling runs on mission time, so a
replayed run logs the same lines.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from utils.logger import log, log_error


class StageStatus(Enum):
    HEALTHY = "healthy"
    DEGRADED = "degraded"  # Error streak at or above degraded_threshold
    FAILED = "failed"      # Error streak at or above failure_threshold


@dataclass
class StageHealth:
    """Snapshot for the run summary"""
    name: str
    status: StageStatus
    last_error: Optional[str] = None
    error_count: int = 0
    success_count: int = 0
    last_success: Optional[float] = None  # mission time


@dataclass
class StageTracker:
    """Error streak and log throttle for one stage"""
    name: str
    expected_errors: List[str] = field(default_factory=list)
    log_interval_s: float = 5400.0
    failure_threshold: int = 20
    degraded_threshold: int = 3

    streak: int = 0
    errors: int = 0
    successes: int = 0
    last_error: Optional[str] = None
    last_logged_at: Optional[float] = None
    last_success_at: Optional[float] = None
    failure_announced: bool = False

    @property
    def status(self) -> StageStatus:
        if self.streak >= self.failure_threshold:
            return StageStatus.FAILED
        if self.streak >= self.degraded_threshold:
            return StageStatus.DEGRADED
        return StageStatus.HEALTHY

    def report_success(self, now: float):
        if self.status is not StageStatus.HEALTHY:
            log(f"Stage '{self.name}' recovered at t={now:.0f}s after {self.streak} errors", "HEALTH")
        self.streak = 0
        self.successes += 1
        self.last_success_at = now
        self.failure_announced = False

    def report_error(self, error: Exception, now: float) -> bool:
        """Count an error at mission time `now`; True if the caller should log it"""
        self.streak += 1
        self.errors += 1
        self.last_error = str(error)

        if any(text in self.last_error for text in self.expected_errors):
            return False
        if self.last_logged_at is not None and now - self.last_logged_at < self.log_interval_s:
            return False
        self.last_logged_at = now
        return True

    def is_failed(self) -> bool:
        return self.status is StageStatus.FAILED

    def is_degraded(self) -> bool:
        """Degraded or failed"""
        return self.status is not StageStatus.HEALTHY

    def log_failure_once(self, message: str):
        """Log once per failure streak"""
        if not self.failure_announced:
            self.failure_announced = True
            log_error(message)

    def snapshot(self) -> StageHealth:
        return StageHealth(self.name, self.status, self.last_error,
                           self.errors, self.successes, self.last_success_at)


class RunHealth:
    """
    Stage trackers for one run.

        health = RunHealth()
        laser = health.register("laser", log_interval_s=21600.0)
        try:
            current = optimal_current(temperature, mode_map)
            laser.report_success(t)
        except OutOfGridError as e:
            if laser.report_error(e, t):
                log_warning(f"No laser setting: {e}")
    """

    def __init__(self):
        self._stages: Dict[str, StageTracker] = {}

    def register(self, name: str, expected_errors: Optional[List[str]] = None,
                 log_interval_s: float = 5400.0, failure_threshold: int = 20,
                 degraded_threshold: int = 3) -> StageTracker:
        """Tracker for `name`; an existing name keeps its tracker and settings"""
        if name not in self._stages:
            self._stages[name] = StageTracker(name, list(expected_errors or []), log_interval_s,
                                              failure_threshold, degraded_threshold)
        return self._stages[name]

    def get_all_status(self) -> Dict[str, StageHealth]:
        return {name: tracker.snapshot() for name, tracker in self._stages.items()}
