"""
Scenario configuration: the resolved parameter set of one run, and the
flat key-value scenario file it is loaded from.

File format:

    # comment
    detector_distance_mm = 100
    full_sun_intervals_h = 144-244, 400-410
    mode_hop_map_path = ground_test.map       (relative to the scenario file)

Keys are field names of the sub-configs, units included. A key that
several sub-configs share (crystal_length_mm, beam_fwhm_x_um, ...) sets
all of them. Unknown or repeated keys are errors.
"""

import hashlib
import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, List, Optional, Tuple

from config.settings import (
    SINGLES_PER_PAIR,
    POLARIZER_SINGLES_TRANSMISSION,
    INTEGRATION_TIME_PER_POINT_S,
    LCPR_MAX_SPAN_DEG,
    MIN_SWEEP_POINTS,
    CHSH_B_DEG,
    CHSH_B_PRIME_DEG,
    CHSH_SWEEP_START_DEG,
    CHSH_SWEEP_STEP_DEG,
    CHSH_SWEEP_POINTS,
    DA_SETTING_ERROR_DEG,
    OPERATING_TEMPERATURE_C,
    SURVEY_SWEEP_START_DEG,
    SURVEY_SWEEP_STEP_DEG,
    SURVEY_SWEEP_POINTS,
    SURVEY_INTEGRATION_TIME_S,
    MEASUREMENT_INTERVAL_S,
    SETTLE_TIME_S,
    MISSION_DURATION_S,
    THERMAL_STEP_S,
    INITIAL_PAYLOAD_TEMPERATURE_C,
    DEFAULT_SEED,
)
from core.errors import ConfigError
from hardware.detectors import CoincidenceWindow, DetectorConfig
from hardware.laser import ModeHopMap, SourceConfig, load_mode_hop_map, synthetic_mode_hop_map
from hardware.optics import OpticalLayout
from hardware.thermal import HeaterConfig, OrbitProfile
from utils.logger import log_config

SECTIONS = {
    "source": SourceConfig,
    "detector": DetectorConfig,
    "window": CoincidenceWindow,
    "layout": OpticalLayout,
    "orbit": OrbitProfile,
    "heater": HeaterConfig,
}

# Field names too generic to stand alone in a flat file
KEY_ALIASES = {
    ("detector", "efficiency"): "detector_efficiency",
    ("window", "tau_ns"): "coincidence_window_ns",
    ("heater", "power_w"): "heater_power_w",
    ("heater", "enabled"): "heater_enabled",
}

OPTIONAL_TYPES = {"laser_current_ma": float, "geometric_efficiency": float, "mode_hop_map_path": str}
TRUE_WORDS = ("true", "yes", "on", "1")
FALSE_WORDS = ("false", "no", "off", "0")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Everything one run needs; sub-configs validate themselves"""
    source: SourceConfig = field(default_factory=SourceConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    window: CoincidenceWindow = field(default_factory=CoincidenceWindow)
    layout: OpticalLayout = field(default_factory=OpticalLayout)
    orbit: OrbitProfile = field(default_factory=OrbitProfile)
    heater: HeaterConfig = field(default_factory=HeaterConfig)
    mode_hop_map: ModeHopMap = field(default_factory=synthetic_mode_hop_map)
    mode_hop_map_path: Optional[str] = None

    geometric_efficiency: Optional[float] = None  # None: Monte Carlo estimate for `layout`
    singles_per_pair: float = SINGLES_PER_PAIR
    polarizer_singles_transmission: float = POLARIZER_SINGLES_TRANSMISSION

    integration_time_per_point_s: float = INTEGRATION_TIME_PER_POINT_S
    lcpr_max_span_deg: float = LCPR_MAX_SPAN_DEG
    min_sweep_points: int = MIN_SWEEP_POINTS
    chsh_b_deg: float = CHSH_B_DEG
    chsh_b_prime_deg: float = CHSH_B_PRIME_DEG
    chsh_sweep_start_deg: float = CHSH_SWEEP_START_DEG
    chsh_sweep_step_deg: float = CHSH_SWEEP_STEP_DEG
    chsh_sweep_points: int = CHSH_SWEEP_POINTS
    da_setting_error_deg: float = DA_SETTING_ERROR_DEG
    settings_offset_deg: float = 0.0

    operating_temperature_c: float = OPERATING_TEMPERATURE_C
    laser_current_ma: Optional[float] = None  # None: optimal_current at the payload temperature
    tilt_detuning_urad: float = 0.0

    survey_sweep_start_deg: float = SURVEY_SWEEP_START_DEG
    survey_sweep_step_deg: float = SURVEY_SWEEP_STEP_DEG
    survey_sweep_points: int = SURVEY_SWEEP_POINTS
    survey_integration_time_s: float = SURVEY_INTEGRATION_TIME_S

    measurement_interval_s: float = MEASUREMENT_INTERVAL_S
    settle_time_s: float = SETTLE_TIME_S
    mission_duration_s: float = MISSION_DURATION_S
    thermal_step_s: float = THERMAL_STEP_S
    initial_temperature_c: float = INITIAL_PAYLOAD_TEMPERATURE_C

    seed: int = DEFAULT_SEED

    def __post_init__(self):
        for name in ("geometric_efficiency", "polarizer_singles_transmission"):
            if getattr(self, name) is not None and not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name}={getattr(self, name)} outside [0, 1]")
        for name in ("singles_per_pair", "settle_time_s", "mission_duration_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("integration_time_per_point_s", "survey_integration_time_s",
                     "measurement_interval_s", "thermal_step_s", "chsh_sweep_step_deg",
                     "survey_sweep_step_deg"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")


def _section_defaults() -> Dict[str, Any]:
    return {name: cls() for name, cls in SECTIONS.items()}


def _key_table() -> Dict[str, List[Tuple[str, str]]]:
    """file key -> [(section or '', field name)]"""
    table: Dict[str, List[Tuple[str, str]]] = {}
    for section, cls in SECTIONS.items():
        for f in fields(cls):
            key = KEY_ALIASES.get((section, f.name), f.name)
            table.setdefault(key, []).append((section, f.name))
    for f in fields(ScenarioConfig):
        if f.name in SECTIONS or f.name == "mode_hop_map":
            continue
        if f.name in table:
            raise ConfigError(f"Scenario key {f.name} is ambiguous")
        table[f.name] = [("", f.name)]
    return table


def _parse_intervals(text: str) -> Tuple[Tuple[float, float], ...]:
    text = text.strip()
    if text.lower() in ("", "none"):
        return ()
    intervals = []
    for item in text.split(","):
        start, sep, end = item.strip().partition("-")
        if not sep:
            raise ValueError(f"interval '{item.strip()}' is not start-end")
        intervals.append((float(start), float(end)))
    return tuple(intervals)


def _parse_value(key: str, text: str, default: Any) -> Any:
    if key in OPTIONAL_TYPES:
        return None if text.strip().lower() in ("", "none") else OPTIONAL_TYPES[key](text.strip())
    if isinstance(default, bool):
        word = text.strip().lower()
        if word in TRUE_WORDS:
            return True
        if word in FALSE_WORDS:
            return False
        raise ValueError(f"expected a boolean, got '{text}'")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return _parse_intervals(text)
    return text.strip()


def _default_for(section: str, name: str, defaults: Dict[str, Any]) -> Any:
    if section:
        return getattr(defaults[section], name)
    return getattr(ScenarioConfig, name, None)


def build_scenario(values: Dict[str, str], base_dir: str = ".") -> ScenarioConfig:
    """ScenarioConfig from file keys -> raw text values"""
    table = _key_table()
    defaults = _section_defaults()
    section_kwargs: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    top_kwargs: Dict[str, Any] = {}

    for key, text in values.items():
        if key not in table:
            raise ConfigError(f"Unknown scenario key '{key}'")
        for section, name in table[key]:
            try:
                value = _parse_value(key, text, _default_for(section, name, defaults))
            except ValueError as e:
                raise ConfigError(f"Bad value for {key}: {e}") from e
            (section_kwargs[section] if section else top_kwargs)[name] = value

    map_path = top_kwargs.get("mode_hop_map_path")
    if map_path is not None:
        if not os.path.isabs(map_path):
            map_path = os.path.join(base_dir, map_path)
        top_kwargs["mode_hop_map_path"] = map_path
        top_kwargs["mode_hop_map"] = load_mode_hop_map(map_path)

    sections = {name: SECTIONS[name](**kwargs) for name, kwargs in section_kwargs.items()}
    return ScenarioConfig(**sections, **top_kwargs)


def read_scenario_file(path: str) -> Dict[str, str]:
    values: Dict[str, str] = {}
    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read scenario file {path}: {e}") from e
    with handle:
        for number, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"{path}:{number}: expected 'key = value'")
            if key in values:
                raise ConfigError(f"{path}:{number}: duplicate key '{key}'")
            values[key] = value.strip()
    return values


def load_scenario(path: str) -> ScenarioConfig:
    scenario = build_scenario(read_scenario_file(path), os.path.dirname(os.path.abspath(path)))
    log_config(f"Loaded scenario {path} (hash {config_hash(scenario)[:12]})")
    return scenario


def with_overrides(scenario: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Copy with top-level fields replaced (CLI flags such as --seed)"""
    return replace(scenario, **overrides)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(f"{start!r}-{end!r}" for start, end in value) or "none"
    return str(value)


def scenario_items(scenario: ScenarioConfig) -> List[Tuple[str, str]]:
    """Sorted (key, value) pairs of the resolved scenario, map grid digest included"""
    items = {}
    for key, targets in _key_table().items():
        section, name = targets[0]
        owner = getattr(scenario, section) if section else scenario
        items[key] = _format_value(getattr(owner, name))
    mode_map = scenario.mode_hop_map
    digest = hashlib.sha256()
    digest.update(repr((mode_map.currents, mode_map.temperatures, mode_map.power_mw)).encode("utf-8"))
    digest.update(mode_map.visibility.tobytes())
    items["mode_hop_map_sha256"] = digest.hexdigest()
    items.pop("mode_hop_map_path", None)  # location does not change results
    return sorted(items.items())


def config_hash(scenario: ScenarioConfig) -> str:
    """SHA-256 of the canonical key=value dump"""
    canonical = "\n".join(f"{key}={value}" for key, value in scenario_items(scenario))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dump_scenario(scenario: ScenarioConfig, path: str):
    """Write the resolved scenario; the map itself is summarized by its digest"""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(f"# Resolved scenario, config hash {config_hash(scenario)}\n")
        for key, value in scenario_items(scenario):
            prefix = "# " if key == "mode_hop_map_sha256" else ""
            handle.write(f"{prefix}{key} = {value}\n")
