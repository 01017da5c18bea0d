"""
Enums + dataclasses shared between the simulation stages
"""

import math
from enum import Enum, auto
from dataclasses import dataclass
from typing import Optional

from core.errors import ConfigError


class Arm(Enum):
    """Which photon of the pair an analyzer acts on"""
    SIGNAL = "signal"
    IDLER = "idler"

    def other(self) -> "Arm":
        return Arm.IDLER if self is Arm.SIGNAL else Arm.SIGNAL


class Basis(Enum):
    """Linear analyzer labels and their polarizer angles (degrees)"""
    H = 0.0
    V = 90.0
    D = 45.0
    A = 135.0

    @property
    def angle_deg(self) -> float:
        return self.value


class Illumination(Enum):
    """Solar illumination condition of the spacecraft"""
    SUN = "sun"
    ECLIPSE = "eclipse"
    FULL_SUN_PERIOD = "full_sun_period"


class HitOutcome(Enum):
    """Classification of a traced photon pair"""
    BOTH = auto()
    SIGNAL_ONLY = auto()
    IDLER_ONLY = auto()
    NEITHER = auto()


def reduce_angle(angle_deg: float) -> float:
    """Reduce a linear-polarizer angle to [0, 180)"""
    reduced = float(angle_deg) % 180.0
    # -1e-17 % 180 gives 180.0
    return 0.0 if reduced >= 180.0 else reduced


@dataclass(frozen=True)
class AnalyzerSetting:
    """Polarizer angles (degrees) in front of the signal and idler detectors"""
    theta_signal: float
    theta_idler: float

    def __post_init__(self):
        object.__setattr__(self, "theta_signal", reduce_angle(self.theta_signal))
        object.__setattr__(self, "theta_idler", reduce_angle(self.theta_idler))

    def __str__(self):
        return f"({self.theta_signal:.2f}°, {self.theta_idler:.2f}°)"


@dataclass(frozen=True)
class VisibilitySet:
    """Correlation-curve visibilities with the fixed arm at H, V, D and A"""
    v_h: float
    v_v: float
    v_d: float
    v_a: float

    def __post_init__(self):
        for name in ("v_h", "v_v", "v_d", "v_a"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name}={value} outside [0, 1]")

    @property
    def v_hv(self) -> float:
        return 0.5 * (self.v_h + self.v_v)

    @property
    def v_da(self) -> float:
        return 0.5 * (self.v_d + self.v_a)

    @property
    def mean(self) -> float:
        return 0.25 * (self.v_h + self.v_v + self.v_d + self.v_a)


@dataclass(frozen=True)
class CountRecord:
    """Counts collected at one analyzer setting.

    Counts are floats so that expected (noiseless) records share the type
    with Poisson-drawn ones.
    """
    singles_signal: float
    singles_idler: float
    coincidences: float
    integration_time: float
    setting: AnalyzerSetting

    def __post_init__(self):
        if min(self.singles_signal, self.singles_idler, self.coincidences) < 0:
            raise ConfigError(f"Negative counts in record at {self.setting}")
        if self.integration_time <= 0:
            raise ConfigError(f"integration_time must be > 0, got {self.integration_time}")
        if self.coincidences > min(self.singles_signal, self.singles_idler) + 1e-9:
            raise ConfigError(
                f"Coincidences {self.coincidences} exceed singles at {self.setting}"
            )

    @property
    def singles_rates(self):
        return (self.singles_signal / self.integration_time,
                self.singles_idler / self.integration_time)

    @property
    def coincidence_rate(self) -> float:
        return self.coincidences / self.integration_time


@dataclass(frozen=True)
class ThermalState:
    """Payload thermal state at one mission time"""
    time: float
    payload_temperature: float
    heater_on: bool
    illumination: Illumination
    ambient_temperature: float = 0.0
    last_heater_off: Optional[float] = None  # Mission time the heater last switched off

    def __post_init__(self):
        if not math.isfinite(self.payload_temperature):
            raise ConfigError(f"Non-finite payload temperature at t={self.time}")

    def __str__(self):
        heater = "ON" if self.heater_on else "off"
        return (f"ThermalState(t={self.time:.0f}s, T={self.payload_temperature:.2f}°C, "
                f"heater={heater}, {self.illumination.value})")
