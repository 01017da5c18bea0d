"""
Orbital thermal environment and the payload heater.

Single lumped node: C dT/dt = P_heater * on - G (T - ambient), integrated
with explicit Euler steps of at most MAX_THERMAL_STEP_S.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from config.settings import (
    ORBIT_PERIOD_MIN,
    AMBIENT_MIN_C,
    AMBIENT_MAX_C,
    ECLIPSE_FRACTION,
    FULL_SUN_AMBIENT_C,
    FULL_SUN_INTERVALS_H,
    HEATER_POWER_W,
    BAND_LOW_C,
    BAND_HIGH_C,
    HEATER_HYSTERESIS_C,
    HEATER_CYCLE_GAP_S,
    THERMAL_CAPACITANCE_J_PER_C,
    CONDUCTANCE_TO_BUS_W_PER_C,
    THERMAL_STEP_S,
    MAX_THERMAL_STEP_S,
    INITIAL_PAYLOAD_TEMPERATURE_C,
)
from core.errors import ConfigError
from core.state import Illumination, ThermalState
from utils.export import write_csv
from utils.logger import log_thermal

THERMAL_TRACE_COLUMNS = ("time_s", "ambient_C", "payload_C", "heater_on", "illumination")
GAP_TOLERANCE_S = 1e-9


@dataclass(frozen=True)
class OrbitProfile:
    """Ambient temperature and illumination schedule of the orbit"""
    period_min: float = ORBIT_PERIOD_MIN
    ambient_min_c: float = AMBIENT_MIN_C
    ambient_max_c: float = AMBIENT_MAX_C
    eclipse_fraction: float = ECLIPSE_FRACTION
    full_sun_ambient_c: float = FULL_SUN_AMBIENT_C
    full_sun_intervals_h: Tuple[Tuple[float, float], ...] = FULL_SUN_INTERVALS_H

    def __post_init__(self):
        if self.period_min <= 0:
            raise ConfigError(f"period_min must be > 0, got {self.period_min}")
        if self.ambient_min_c > self.ambient_max_c:
            raise ConfigError("ambient_min_c must not exceed ambient_max_c")
        if not 0.0 <= self.eclipse_fraction <= 1.0:
            raise ConfigError(f"eclipse_fraction={self.eclipse_fraction} outside [0, 1]")
        intervals = tuple((float(start), float(end)) for start, end in self.full_sun_intervals_h)
        for start, end in intervals:
            if start < 0 or end <= start:
                raise ConfigError(f"Bad full-sun interval ({start}, {end}) h")
        object.__setattr__(self, "full_sun_intervals_h", intervals)

    @property
    def period_s(self) -> float:
        return self.period_min * 60.0

    @property
    def full_sun_intervals_s(self) -> List[Tuple[float, float]]:
        return [(3600.0 * start, 3600.0 * end) for start, end in self.full_sun_intervals_h]

    def in_full_sun(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.full_sun_intervals_s)

    def eclipse_fraction_at(self, t: float) -> float:
        """Share of the orbit spent in eclipse at mission time t"""
        return 0.0 if self.in_full_sun(t) else self.eclipse_fraction


@dataclass(frozen=True)
class HeaterConfig:
    """Heater power, safe band and lumped thermal constants"""
    power_w: float = HEATER_POWER_W
    band_low_c: float = BAND_LOW_C
    band_high_c: float = BAND_HIGH_C
    hysteresis_c: float = HEATER_HYSTERESIS_C
    cycle_gap_s: float = HEATER_CYCLE_GAP_S
    thermal_capacitance_j_per_c: float = THERMAL_CAPACITANCE_J_PER_C
    conductance_to_bus_w_per_c: float = CONDUCTANCE_TO_BUS_W_PER_C
    enabled: bool = True

    def __post_init__(self):
        if self.power_w < 0:
            raise ConfigError(f"Heater power must be >= 0, got {self.power_w}")
        if self.band_low_c >= self.band_high_c:
            raise ConfigError(f"band_low_c {self.band_low_c} must be < band_high_c {self.band_high_c}")
        if self.hysteresis_c < 0 or self.cycle_gap_s < 0:
            raise ConfigError("hysteresis_c and cycle_gap_s must be >= 0")
        if self.set_point_c >= self.band_high_c:
            raise ConfigError("band_low_c + hysteresis_c must stay below band_high_c")
        if self.thermal_capacitance_j_per_c <= 0 or self.conductance_to_bus_w_per_c <= 0:
            raise ConfigError("Thermal capacitance and conductance must be > 0")

    @property
    def set_point_c(self) -> float:
        """Heater runs while the payload is below this temperature"""
        return self.band_low_c + self.hysteresis_c


def ambient_temperature(t: float, profile: OrbitProfile) -> float:
    """Bus temperature: sinusoid over one orbit, plateau during full sun"""
    if t < 0:
        raise ConfigError(f"Mission time must be >= 0, got {t}")
    if profile.in_full_sun(t):
        return profile.full_sun_ambient_c
    mid = 0.5 * (profile.ambient_max_c + profile.ambient_min_c)
    amplitude = 0.5 * (profile.ambient_max_c - profile.ambient_min_c)
    return mid + amplitude * math.sin(2.0 * math.pi * t / profile.period_s)


def illumination_at(t: float, profile: OrbitProfile) -> Illumination:
    """Eclipse is centred on the ambient minimum (three quarters into each orbit)"""
    if profile.in_full_sun(t):
        return Illumination.FULL_SUN_PERIOD
    phase = (t / profile.period_s) % 1.0
    if abs(phase - 0.75) <= 0.5 * profile.eclipse_fraction:
        return Illumination.ECLIPSE
    return Illumination.SUN


def heater_step(state: ThermalState, config: HeaterConfig, dt: float, ambient: float,
                illumination: Optional[Illumination] = None) -> ThermalState:
    """Advance one Euler step.

    The returned state's heater_on is the heater status during the step
    just taken. A heater that switched off may not switch on again until
    cycle_gap_s has passed.
    """
    if not 0.0 < dt <= MAX_THERMAL_STEP_S:
        raise ConfigError(f"dt must be in (0, {MAX_THERMAL_STEP_S}] s, got {dt}")

    last_off = state.last_heater_off
    heat = config.enabled and state.payload_temperature < config.set_point_c
    if heat and not state.heater_on and last_off is not None:
        heat = state.time - last_off >= config.cycle_gap_s - GAP_TOLERANCE_S
    if state.heater_on and not heat:
        last_off = state.time

    heater_power = config.power_w if heat else 0.0
    flow = heater_power - config.conductance_to_bus_w_per_c * (state.payload_temperature - ambient)
    temperature = state.payload_temperature + dt * flow / config.thermal_capacitance_j_per_c
    return ThermalState(
        time=state.time + dt,
        payload_temperature=temperature,
        heater_on=heat,
        illumination=illumination if illumination is not None else state.illumination,
        ambient_temperature=ambient,
        last_heater_off=last_off,
    )


def can_operate(state: ThermalState, config: HeaterConfig) -> bool:
    """Inside the safe band and not in a full-sun blackout"""
    if state.illumination is Illumination.FULL_SUN_PERIOD:
        return False
    return config.band_low_c <= state.payload_temperature <= config.band_high_c


def simulate_thermal(profile: OrbitProfile, heater: HeaterConfig, duration: float,
                     dt: float = THERMAL_STEP_S,
                     initial_temperature: float = INITIAL_PAYLOAD_TEMPERATURE_C) -> List[ThermalState]:
    """Trace from t = 0 to duration (inclusive of both ends when dt divides it)"""
    if duration < 0:
        raise ConfigError(f"duration must be >= 0, got {duration}")
    state = ThermalState(
        time=0.0,
        payload_temperature=initial_temperature,
        heater_on=False,
        illumination=illumination_at(0.0, profile),
        ambient_temperature=ambient_temperature(0.0, profile),
    )
    trace = [state]
    steps = int(math.floor(duration / dt + 1e-9))
    for _ in range(steps):
        ambient = ambient_temperature(state.time, profile)
        state = heater_step(state, heater, dt, ambient, illumination_at(state.time + dt, profile))
        trace.append(state)

    temperatures = [s.payload_temperature for s in trace]
    log_thermal(f"Simulated {duration / 3600.0:.1f} h: payload {min(temperatures):.2f}..{max(temperatures):.2f}°C, "
                f"{len(heater_on_intervals(trace))} heater cycle(s)")
    return trace


def heater_on_intervals(trace: Sequence[ThermalState]) -> List[Tuple[float, float]]:
    """(start, end) mission times of every heating cycle"""
    intervals = []
    start = None
    for previous, current in zip(trace, trace[1:]):
        if current.heater_on and start is None:
            start = previous.time
        elif not current.heater_on and start is not None:
            intervals.append((start, previous.time))
            start = None
    if start is not None:
        intervals.append((start, trace[-1].time))
    return intervals


def write_thermal_trace(trace: Sequence[ThermalState], path: str, every: int = 1) -> int:
    """CSV columns: time_s, ambient_C, payload_C, heater_on, illumination"""
    rows = (
        {
            "time_s": s.time,
            "ambient_C": s.ambient_temperature,
            "payload_C": s.payload_temperature,
            "heater_on": int(s.heater_on),
            "illumination": s.illumination.value,
        }
        for s in trace[::max(1, every)]
    )
    return write_csv(path, THERMAL_TRACE_COLUMNS, rows)
