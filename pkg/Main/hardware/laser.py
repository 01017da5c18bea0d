"""
Pump laser + crystal model: tilt phase, wavelengths, mode-hop map, pair rate.

Maps physical source parameters to the emitted two-photon state. The
mode-hop map stores D/A visibility over (temperature, current) as measured
by a laser survey, plus the pump power vs current curve.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from config.settings import (
    PUMP_WAVELENGTH_NM,
    PUMP_LINEWIDTH_MHZ,
    BEAM_FWHM_X_UM,
    BEAM_FWHM_Y_UM,
    CRYSTAL_CUT_ANGLE_DEG,
    CRYSTAL_LENGTH_MM,
    TILT_PHASE_COEFFICIENT_RAD_PER_URAD,
    MAX_TILT_DETUNING_URAD,
    WAVELENGTH_SPLIT_NM,
    BRIGHTNESS_PAIRS_PER_S_PER_MW,
    INTRINSIC_VISIBILITY_HV,
    MAP_CURRENTS_MA,
    MAP_TEMPERATURES_C,
    MAP_PEAK_VISIBILITY,
    MAP_BAND_VISIBILITY,
    MAP_BAND_WIDTH_MA,
    MAP_BAND_PERIOD_MA,
    MAP_BAND_DRIFT_MA_PER_C,
    MAP_BAND_OFFSET_MA,
    LASER_THRESHOLD_MA,
    LASER_SLOPE_MW_PER_MA,
    LASER_PLATEAU_START_MA,
    LASER_PLATEAU_SLOPE_MW_PER_MA,
)
from core.errors import ConfigError, NoSolutionError, OutOfGridError
from core.polarization import TwoPhotonState, make_state
from utils.logger import log_config

GRID_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SourceConfig:
    """Pump and crystal parameters of the two-crystal source"""
    pump_wavelength_nm: float = PUMP_WAVELENGTH_NM
    pump_linewidth_mhz: float = PUMP_LINEWIDTH_MHZ
    beam_fwhm_x_um: float = BEAM_FWHM_X_UM
    beam_fwhm_y_um: float = BEAM_FWHM_Y_UM
    crystal_cut_angle_deg: float = CRYSTAL_CUT_ANGLE_DEG
    crystal_length_mm: float = CRYSTAL_LENGTH_MM
    tilt_phase_coefficient: float = TILT_PHASE_COEFFICIENT_RAD_PER_URAD  # rad per urad
    wavelength_split_nm: float = WAVELENGTH_SPLIT_NM
    brightness_pairs_per_s_per_mw: float = BRIGHTNESS_PAIRS_PER_S_PER_MW
    intrinsic_visibility_hv: float = INTRINSIC_VISIBILITY_HV

    def __post_init__(self):
        for name in ("pump_wavelength_nm", "pump_linewidth_mhz", "beam_fwhm_x_um",
                     "beam_fwhm_y_um", "crystal_length_mm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.wavelength_split_nm < 0 or self.brightness_pairs_per_s_per_mw < 0:
            raise ConfigError("wavelength_split_nm and brightness must be >= 0")
        if not 0.0 <= self.intrinsic_visibility_hv <= 1.0:
            raise ConfigError(f"intrinsic_visibility_hv={self.intrinsic_visibility_hv} outside [0, 1]")


@dataclass(frozen=True)
class LaserOperatingPoint:
    """Pump diode drive current and temperature"""
    current: float  # mA
    temperature: float  # degC

    def __post_init__(self):
        if self.current < 0:
            raise ConfigError(f"Laser current must be >= 0, got {self.current}")

    def __str__(self):
        return f"{self.current:.1f} mA @ {self.temperature:.2f}°C"


@dataclass(frozen=True, eq=False)
class ModeHopMap:
    """D/A visibility over (temperature, current) plus pump power per current.

    visibility[i, j] belongs to temperatures[i] and currents[j].
    """
    currents: Tuple[float, ...]
    temperatures: Tuple[float, ...]
    visibility: np.ndarray
    power_mw: Optional[Tuple[float, ...]] = field(default=None)

    def __post_init__(self):
        currents = tuple(float(c) for c in self.currents)
        temperatures = tuple(float(t) for t in self.temperatures)
        grid = np.array(self.visibility, dtype=float)
        if not currents or not temperatures:
            raise ConfigError("Mode-hop map needs at least one current and one temperature")
        if grid.shape != (len(temperatures), len(currents)):
            raise ConfigError(
                f"Visibility grid shape {grid.shape} != ({len(temperatures)}, {len(currents)})"
            )
        if list(currents) != sorted(set(currents)) or list(temperatures) != sorted(set(temperatures)):
            raise ConfigError("Mode-hop map axes must be strictly increasing")
        if np.any(grid < 0.0) or np.any(grid > 1.0) or not np.all(np.isfinite(grid)):
            raise ConfigError("Mode-hop map visibilities must lie in [0, 1]")
        if self.power_mw is not None:
            power = tuple(float(p) for p in self.power_mw)
            if len(power) != len(currents) or min(power) < 0:
                raise ConfigError("power_mw needs one non-negative value per current")
            object.__setattr__(self, "power_mw", power)
        grid.setflags(write=False)
        object.__setattr__(self, "currents", currents)
        object.__setattr__(self, "temperatures", temperatures)
        object.__setattr__(self, "visibility", grid)

    def contains(self, point: LaserOperatingPoint) -> bool:
        return (self.currents[0] - GRID_TOLERANCE <= point.current <= self.currents[-1] + GRID_TOLERANCE
                and self.contains_temperature(point.temperature))

    def contains_temperature(self, temperature: float) -> bool:
        return self.temperatures[0] - GRID_TOLERANCE <= temperature <= self.temperatures[-1] + GRID_TOLERANCE


def phase_from_tilt(detuning: float, config: SourceConfig) -> float:
    """Pair phase for a BBO-1 angular detuning (urad); pi at perfect alignment"""
    if abs(detuning) > MAX_TILT_DETUNING_URAD:
        raise ConfigError(f"|detuning| must be <= {MAX_TILT_DETUNING_URAD} urad, got {detuning}")
    return math.pi + config.tilt_phase_coefficient * detuning


def visibility_vs_detuning(detuning: float, config: SourceConfig) -> float:
    """D/A visibility |cos(k . detuning)| of the ideal state at this detuning"""
    return abs(math.cos(phase_from_tilt(detuning, config) - math.pi))


def signal_idler_wavelengths(pump_wavelength: float, split: float) -> Tuple[float, float]:
    """(signal, idler) in nm: signal sits `split` below degeneracy, idler from energy conservation"""
    if split < 0:
        raise NoSolutionError(f"split must be >= 0, got {split}")
    signal = 2.0 * pump_wavelength - split
    if signal <= pump_wavelength:
        raise NoSolutionError(
            f"split {split} nm leaves signal at {signal} nm, not above the {pump_wavelength} nm pump"
        )
    idler = 1.0 / (1.0 / pump_wavelength - 1.0 / signal)
    return signal, idler


def visibility_at(point: LaserOperatingPoint, mode_map: ModeHopMap) -> float:
    """Bilinear interpolation of the map at (current, temperature)"""
    if not mode_map.contains(point):
        raise OutOfGridError(
            f"{point} outside map ({mode_map.currents[0]}-{mode_map.currents[-1]} mA, "
            f"{mode_map.temperatures[0]}-{mode_map.temperatures[-1]}°C)"
        )
    # Interpolating each row in current and then across rows in temperature is bilinear
    per_row = np.array([np.interp(point.current, mode_map.currents, row) for row in mode_map.visibility])
    return float(np.interp(point.temperature, mode_map.temperatures, per_row))


def optimal_current(temperature: float, mode_map: ModeHopMap) -> float:
    """Grid current with the highest visibility at this temperature (ties: lower current)"""
    if not mode_map.contains_temperature(temperature):
        raise OutOfGridError(
            f"{temperature:.2f}°C outside map range {mode_map.temperatures[0]}-{mode_map.temperatures[-1]}°C"
        )
    best_current, best_visibility = mode_map.currents[0], -1.0
    for current in mode_map.currents:
        value = visibility_at(LaserOperatingPoint(current, temperature), mode_map)
        if value > best_visibility + TIE_TOLERANCE:
            best_current, best_visibility = current, value
    return best_current


def pair_rate(pump_power: float, brightness: float) -> float:
    """Generated pairs/s, linear in pump power"""
    if pump_power < 0 or brightness < 0:
        raise ConfigError("pump_power and brightness must be >= 0")
    return pump_power * brightness


def default_power_curve(currents: Sequence[float]) -> Tuple[float, ...]:
    """Pump power (mW) per current: linear above threshold, flatter past the plateau start"""
    powers = []
    for current in currents:
        linear = LASER_SLOPE_MW_PER_MA * max(0.0, min(current, LASER_PLATEAU_START_MA) - LASER_THRESHOLD_MA)
        plateau = LASER_PLATEAU_SLOPE_MW_PER_MA * max(0.0, current - LASER_PLATEAU_START_MA)
        powers.append(linear + plateau)
    return tuple(powers)


def pump_power(current: float, mode_map: ModeHopMap) -> float:
    """Pump power (mW) at a drive current, from the map's power curve"""
    if current < 0:
        raise ConfigError(f"current must be >= 0, got {current}")
    curve = mode_map.power_mw if mode_map.power_mw is not None else default_power_curve(mode_map.currents)
    if len(curve) == 1:
        return curve[0]
    return float(np.interp(current, mode_map.currents, curve))


def synthetic_mode_hop_map(
    currents: Sequence[float] = MAP_CURRENTS_MA,
    temperatures: Sequence[float] = MAP_TEMPERATURES_C,
    peak: float = MAP_PEAK_VISIBILITY,
    band_visibility: float = MAP_BAND_VISIBILITY,
    band_width: float = MAP_BAND_WIDTH_MA,
    band_period: float = MAP_BAND_PERIOD_MA,
    drift: float = MAP_BAND_DRIFT_MA_PER_C,
    offset: float = MAP_BAND_OFFSET_MA,
) -> ModeHopMap:
    """Banded map: mode-hop bands repeat every band_period mA and drift with temperature"""
    grid = np.full((len(temperatures), len(currents)), float(peak))
    if band_period > 0 and band_width > 0:
        for i, temperature in enumerate(temperatures):
            center = offset + drift * (temperature - temperatures[0])
            for j, current in enumerate(currents):
                distance = (current - center) % band_period
                distance = min(distance, band_period - distance)
                if distance < 0.5 * band_width:
                    grid[i, j] = band_visibility
    return ModeHopMap(tuple(currents), tuple(temperatures), grid, default_power_curve(currents))


def source_state(point: LaserOperatingPoint, mode_map: ModeHopMap, config: SourceConfig,
                 detuning: float = 0.0) -> TwoPhotonState:
    """State emitted at this operating point: map D/A visibility plus tilt phase"""
    v_hv = config.intrinsic_visibility_hv
    v_da = min(v_hv, visibility_at(point, mode_map))
    return make_state(phase_from_tilt(detuning, config), v_hv, v_da)


def load_mode_hop_map(path: str) -> ModeHopMap:
    """Read the text grid format.

        # comment
        currents: 30 31 32
        power: 27.0 28.8 30.6        (optional)
        16.0: 0.88 0.30 0.88
        16.5: 0.88 0.88 0.30
    """
    currents, power, rows = None, None, []
    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if ":" not in line:
                raise ConfigError(f"{path}:{number}: expected 'key: values'")
            key, values = line.split(":", 1)
            try:
                numbers = [float(v) for v in values.split()]
                if key.strip() == "currents":
                    currents = numbers
                elif key.strip() == "power":
                    power = numbers
                else:
                    rows.append((float(key), numbers))
            except ValueError as e:
                raise ConfigError(f"{path}:{number}: {e}") from e
    if currents is None or not rows:
        raise ConfigError(f"{path}: needs a 'currents:' header and at least one temperature row")
    if any(len(values) != len(currents) for _, values in rows):
        raise ConfigError(f"{path}: every temperature row needs {len(currents)} values")
    mode_map = ModeHopMap(
        tuple(currents),
        tuple(t for t, _ in rows),
        np.array([values for _, values in rows]),
        tuple(power) if power is not None else None,
    )
    log_config(f"Loaded mode-hop map {path}: {len(rows)} temperatures x {len(currents)} currents")
    return mode_map


def save_mode_hop_map(mode_map: ModeHopMap, path: str):
    """Write a map in the format load_mode_hop_map reads"""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("# D/A visibility per (temperature degC, current mA)\n")
        handle.write("currents: " + " ".join(f"{c:g}" for c in mode_map.currents) + "\n")
        if mode_map.power_mw is not None:
            handle.write("power: " + " ".join(f"{p:.6g}" for p in mode_map.power_mw) + "\n")
        for temperature, row in zip(mode_map.temperatures, mode_map.visibility):
            handle.write(f"{temperature:g}: " + " ".join(f"{v:.6f}" for v in row) + "\n")
