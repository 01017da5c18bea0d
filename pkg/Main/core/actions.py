"""
Experiment actions: analyzer sweeps, curve fits, CHSH extraction, laser survey.

Pure functions of a ScenarioConfig plus an explicit seed; the mission
controller sequences them in mission time.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import curve_fit

from config.settings import (
    CHSH_A_DEG,
    CHSH_A_PRIME_DEG,
    DEFAULT_SEED,
    FIT_MAX_EVALUATIONS,
    FIT_PHASE_STARTS,
    ANGLE_MATCH_TOLERANCE_DEG,
    LCPR_MAX_SPAN_DEG,
    MIN_SWEEP_POINTS,
    RATE_EFFICIENCY_SAMPLES,
)
from config.scenario_file import ScenarioConfig
from core.errors import (
    ConfigError,
    DegenerateDataError,
    FitConvergenceError,
    MissingSettingError,
    NotOperableError,
    SimulationError,
)
from core.polarization import TwoPhotonState, coincidence_probability
from core.state import AnalyzerSetting, Arm, Basis, CountRecord, Illumination, ThermalState, VisibilitySet, reduce_angle
from hardware.detectors import (
    CoincidenceWindow,
    accidental_rate,
    corrected_counts,
    effective_efficiency,
    expected_accidentals,
    simulate_counts,
)
from hardware.laser import LaserOperatingPoint, ModeHopMap, optimal_current, pair_rate, pump_power, source_state
from hardware.optics import OpticalLayout, estimate_geometric_efficiency
from hardware.thermal import can_operate
from utils.logger import log_chsh, log_fit, log_sweep, log_warning
from utils.seeds import STREAM_SURVEY, STREAM_SWEEP, derive_seed

MIN_FIT_POINTS = 4
MIN_FIT_SPAN_DEG = 90.0


@dataclass(frozen=True)
class SweepPlan:
    """One correlation curve: one arm fixed, the other swept by its LCPR"""
    fixed_arm: Arm
    fixed_setting: Basis
    swept_angles: Tuple[float, ...]
    integration_time_per_point: float
    max_span_deg: float = LCPR_MAX_SPAN_DEG
    min_points: int = MIN_SWEEP_POINTS

    def __post_init__(self):
        angles = tuple(float(a) for a in self.swept_angles)
        object.__setattr__(self, "swept_angles", angles)
        if len(angles) < self.min_points:
            raise ConfigError(f"Sweep needs >= {self.min_points} points, got {len(angles)}")
        span = max(angles) - min(angles)
        if span > self.max_span_deg + 1e-9:
            raise ConfigError(f"Sweep span {span:.2f}° exceeds the LCPR limit of {self.max_span_deg}°")
        if self.integration_time_per_point <= 0:
            raise ConfigError("integration_time_per_point must be > 0")

    def setting(self, swept_deg: float, fixed_deg: Optional[float] = None) -> AnalyzerSetting:
        fixed = self.fixed_setting.angle_deg if fixed_deg is None else fixed_deg
        if self.fixed_arm is Arm.SIGNAL:
            return AnalyzerSetting(fixed, swept_deg)
        return AnalyzerSetting(swept_deg, fixed)


@dataclass(frozen=True)
class OperatingRates:
    """Rates at one laser operating point (per second)"""
    pump_power_mw: float
    generated_pairs: float
    detected_pairs: float
    singles: float  # per channel, behind its polarizer
    accidentals: float


@dataclass(frozen=True)
class CorrelationCurveFit:
    """C(theta) = A [1 - V cos 2(theta - theta0)], A in counts/s"""
    amplitude: float
    visibility: float
    phase_offset: float  # degrees in [0, 180)
    residual_norm: float
    amplitude_err: float
    visibility_err: float
    phase_offset_err: float

    def evaluate(self, theta_deg) -> np.ndarray:
        return _curve_model(np.asarray(theta_deg, dtype=float), self.amplitude, self.visibility, self.phase_offset)

    def __str__(self):
        return (f"A={self.amplitude:.1f}/s V={self.visibility:.4f}±{self.visibility_err:.4f} "
                f"θ0={self.phase_offset:.2f}°")


@dataclass(frozen=True, eq=False)
class CorrelationCurve:
    """A measured sweep and its fit (None when the fit failed)"""
    plan: SweepPlan
    records: Tuple[CountRecord, ...]
    fit: Optional[CorrelationCurveFit] = None


@dataclass(frozen=True, eq=False)
class ChshMeasurement:
    """16 counts, the four correlations E(a,b), E(a,b'), E(a',b), E(a',b') and S"""
    records: Tuple[CountRecord, ...]
    correlations: Tuple[float, float, float, float]
    correlation_errors: Tuple[float, float, float, float]
    s: float
    sigma_s: float
    visibilities: Optional[VisibilitySet] = None
    rates: Optional[OperatingRates] = None
    point: Optional[LaserOperatingPoint] = None
    curves: Dict[Basis, CorrelationCurve] = field(default_factory=dict)

    def __str__(self):
        return f"S = {self.s:.3f} ± {self.sigma_s:.3f}"


@lru_cache(maxsize=None)
def layout_efficiency(layout: OpticalLayout) -> float:
    """Monte Carlo both-hit fraction of a layout, traced once per layout"""
    return estimate_geometric_efficiency(layout, RATE_EFFICIENCY_SAMPLES, DEFAULT_SEED).efficiency


def geometric_efficiency(scenario: ScenarioConfig) -> float:
    """The scenario's explicit efficiency, or the estimate for its layout"""
    if scenario.geometric_efficiency is not None:
        return scenario.geometric_efficiency
    return layout_efficiency(scenario.layout)


def operating_rates(scenario: ScenarioConfig, point: LaserOperatingPoint,
                    detector_temperature: float) -> OperatingRates:
    """Pump power -> generated -> detected pairs -> singles and accidentals"""
    power = pump_power(point.current, scenario.mode_hop_map)
    generated = pair_rate(power, scenario.source.brightness_pairs_per_s_per_mw)
    efficiency = effective_efficiency(detector_temperature, scenario.detector)
    detected = generated * geometric_efficiency(scenario) * efficiency * efficiency
    singles = detected * scenario.singles_per_pair * scenario.polarizer_singles_transmission
    total = singles + scenario.detector.dark_count_rate
    return OperatingRates(power, generated, detected, singles, accidental_rate(total, total, scenario.window))


def _nominal_thermal(scenario: ScenarioConfig) -> ThermalState:
    return ThermalState(time=0.0, payload_temperature=scenario.operating_temperature_c,
                        heater_on=False, illumination=Illumination.SUN)


def resolve_operating_point(scenario: ScenarioConfig, temperature: float) -> LaserOperatingPoint:
    current = scenario.laser_current_ma
    if current is None:
        current = optimal_current(temperature, scenario.mode_hop_map)
    return LaserOperatingPoint(current, temperature)


def run_sweep(scenario: ScenarioConfig, plan: SweepPlan, thermal: Optional[ThermalState] = None,
              seed: Optional[int] = None, stream_keys: Sequence[int] = (),
              point: Optional[LaserOperatingPoint] = None, noiseless: bool = False,
              state: Optional[TwoPhotonState] = None) -> List[CountRecord]:
    """Counts at every swept angle.

    Point i draws from derive_seed(seed, STREAM_SWEEP, *stream_keys, i).
    With noiseless=True the records hold the expected counts instead.
    Records carry the nominal setting; a D/A setting error only moves the
    physical analyzer.
    """
    thermal = thermal if thermal is not None else _nominal_thermal(scenario)
    if not can_operate(thermal, scenario.heater):
        raise NotOperableError(f"Cannot run a sweep in {thermal}")
    point = point if point is not None else resolve_operating_point(scenario, thermal.payload_temperature)
    if state is None:
        state = source_state(point, scenario.mode_hop_map, scenario.source, scenario.tilt_detuning_urad)
    rates = operating_rates(scenario, point, thermal.payload_temperature)
    seed = scenario.seed if seed is None else seed

    fixed_deg = plan.fixed_setting.angle_deg
    if plan.fixed_setting in (Basis.D, Basis.A):
        fixed_deg += scenario.da_setting_error_deg
    t = plan.integration_time_per_point

    records = []
    for index, angle in enumerate(plan.swept_angles):
        nominal = plan.setting(angle)
        true_rate = rates.detected_pairs * coincidence_probability(state, plan.setting(angle, fixed_deg))
        if noiseless:
            total = rates.singles + scenario.detector.dark_count_rate
            records.append(CountRecord(total * t, total * t, (true_rate + rates.accidentals) * t, t, nominal))
        else:
            records.append(simulate_counts(
                true_rate, (rates.singles, rates.singles), scenario.detector, scenario.window, t,
                derive_seed(seed, STREAM_SWEEP, *stream_keys, index), setting=nominal,
            ))
    log_sweep(f"{plan.fixed_arm.value} fixed at {plan.fixed_setting.name}: {len(records)} points at {point}, "
              f"{rates.detected_pairs:.0f} pairs/s")
    return records


def _curve_model(theta_deg, amplitude, visibility, phase_deg):
    return amplitude * (1.0 - visibility * np.cos(np.radians(2.0 * (theta_deg - phase_deg))))


def swept_angles_of(records: Sequence[CountRecord]) -> Tuple[Arm, np.ndarray]:
    """Which arm moved across the records, and its angles"""
    signal = np.array([r.setting.theta_signal for r in records])
    idler = np.array([r.setting.theta_idler for r in records])
    if np.all(signal == signal[0]):
        return Arm.IDLER, idler
    if np.all(idler == idler[0]):
        return Arm.SIGNAL, signal
    raise DegenerateDataError("Records vary both analyzers; not a single correlation curve")


def circular_span(angles_deg: np.ndarray) -> float:
    """Covered range of polarizer angles (period 180°)"""
    ordered = np.sort(np.unique(np.mod(angles_deg, 180.0)))
    if len(ordered) < 2:
        return 0.0
    gaps = np.diff(np.append(ordered, ordered[0] + 180.0))
    return 180.0 - float(gaps.max())


def fit_curve(records: Sequence[CountRecord],
              window: Optional[CoincidenceWindow] = None) -> CorrelationCurveFit:
    """Weighted least-squares fit of an accidental-corrected correlation curve.

    Weights are the Poisson errors of the raw coincidences. The phase is
    started from the discrete minimum and FIT_PHASE_STARTS rotations of
    it; the lowest-cost converged start wins.
    """
    if len(records) < MIN_FIT_POINTS:
        raise DegenerateDataError(f"Fit needs >= {MIN_FIT_POINTS} points, got {len(records)}")
    _, theta = swept_angles_of(records)
    if circular_span(theta) < MIN_FIT_SPAN_DEG - 1e-9:
        raise DegenerateDataError(f"Sweep spans {circular_span(theta):.1f}°, fit needs >= {MIN_FIT_SPAN_DEG}°")

    times = np.array([r.integration_time for r in records])
    raw = np.array([r.coincidences for r in records])
    if window is not None:
        counts = np.array([corrected_counts(r, window)[0] for r in records])
    else:
        counts = raw
    rates = counts / times
    if np.ptp(rates) == 0.0:
        raise DegenerateDataError("All counts are equal; visibility and phase are undefined")
    sigma = np.sqrt(np.maximum(raw, 1.0)) / times

    high, low = float(rates.max()), float(rates.min())
    amplitude0 = 0.5 * (high + low)
    visibility0 = min(1.0, max(0.0, (high - low) / (high + low)))
    phase_min = float(theta[int(np.argmin(rates))])

    best = None
    failures = []
    for k in range(FIT_PHASE_STARTS):
        p0 = (amplitude0, visibility0, phase_min + k * 180.0 / FIT_PHASE_STARTS)
        try:
            params, covariance = curve_fit(
                _curve_model, theta, rates, p0=p0, sigma=sigma, absolute_sigma=True,
                bounds=([0.0, 0.0, -np.inf], [np.inf, 1.0, np.inf]), method="trf",
                max_nfev=FIT_MAX_EVALUATIONS, ftol=1e-14, xtol=1e-14, gtol=1e-14,
            )
        except RuntimeError as e:
            failures.append(str(e))
            continue
        cost = float(np.sum(((rates - _curve_model(theta, *params)) / sigma) ** 2))
        if best is None or cost < best[0]:
            best = (cost, params, covariance)
    if best is None:
        raise FitConvergenceError(f"No fit start converged within {FIT_MAX_EVALUATIONS} evaluations: {failures[0]}")

    cost, params, covariance = best
    errors = np.sqrt(np.abs(np.diag(covariance)))
    errors = np.where(np.isfinite(errors), errors, np.inf)
    fit = CorrelationCurveFit(
        amplitude=float(params[0]),
        visibility=float(params[1]),
        phase_offset=reduce_angle(float(params[2])),
        residual_norm=math.sqrt(cost),
        amplitude_err=float(errors[0]),
        visibility_err=float(errors[1]),
        phase_offset_err=float(errors[2]),
    )
    log_fit(str(fit))
    return fit


def _angles_match(a: float, b: float) -> bool:
    difference = abs(reduce_angle(a) - reduce_angle(b))
    return min(difference, 180.0 - difference) <= ANGLE_MATCH_TOLERANCE_DEG


def _point_counts(curve: CorrelationCurve, swept_deg: float,
                  window: CoincidenceWindow) -> Tuple[float, float, Optional[CountRecord]]:
    """(corrected counts, raw-count variance, record) at one swept angle; fit-interpolated if absent"""
    arm = curve.plan.fixed_arm.other()
    for record in curve.records:
        angle = record.setting.theta_idler if arm is Arm.IDLER else record.setting.theta_signal
        if _angles_match(angle, swept_deg):
            corrected, _ = corrected_counts(record, window)
            return corrected, record.coincidences, record
    if curve.fit is None:
        raise MissingSettingError(
            f"Curve {curve.plan.fixed_setting.name} has no point at {reduce_angle(swept_deg):.2f}° and no fit"
        )
    t = curve.records[0].integration_time
    corrected = max(0.0, float(curve.fit.evaluate(swept_deg)) * t)
    mean_accidentals = float(np.mean([expected_accidentals(r, window) for r in curve.records]))
    return corrected, corrected + mean_accidentals, None


def _find_curve(curves: Mapping[Basis, CorrelationCurve], angle_deg: float) -> CorrelationCurve:
    for basis, curve in curves.items():
        if _angles_match(basis.angle_deg, angle_deg):
            return curve
    raise MissingSettingError(f"No correlation curve with the fixed analyzer at {reduce_angle(angle_deg):.1f}°")


def _correlation(curves, a: float, b: float, window: CoincidenceWindow):
    """E(a, b) and its first-order Poisson error from four curve points"""
    points = []
    for a_side, b_side, sign in ((a, b, 1.0), (a + 90.0, b + 90.0, 1.0),
                                 (a, b + 90.0, -1.0), (a + 90.0, b, -1.0)):
        counts, variance, record = _point_counts(_find_curve(curves, a_side), b_side, window)
        points.append((counts, variance, sign, record))
    total = sum(p[0] for p in points)
    if total <= 0.0:
        raise DegenerateDataError(f"No corrected coincidences for E({a:.1f}°, {b:.1f}°)")
    e = sum(sign * counts for counts, _, sign, _ in points) / total
    variance = sum((sign - e) ** 2 * raw for _, raw, sign, _ in points) / total ** 2
    return e, math.sqrt(variance), [p[3] for p in points]


def extract_chsh(curves: Mapping[Basis, CorrelationCurve], settings_offset: float,
                 window: CoincidenceWindow, b: float, b_prime: float,
                 a: float = CHSH_A_DEG, a_prime: float = CHSH_A_PRIME_DEG) -> ChshMeasurement:
    """S from the 16 points of four fixed-analyzer curves.

    Curves are keyed by their fixed basis; the swept-arm angles read are
    b, b', their orthogonals, shifted by settings_offset.
    """
    b_read, b_prime_read = b + settings_offset, b_prime + settings_offset
    pairs = ((a, b_read), (a, b_prime_read), (a_prime, b_read), (a_prime, b_prime_read))
    values, errors, records = [], [], []
    for a_side, b_side in pairs:
        e, sigma, used = _correlation(curves, a_side, b_side, window)
        values.append(e)
        errors.append(sigma)
        records.extend(r for r in used if r is not None)

    s = values[0] + values[1] + values[2] - values[3]
    sigma_s = math.sqrt(sum(err ** 2 for err in errors))
    unique = tuple({id(r): r for r in records}.values())
    measurement = ChshMeasurement(unique, tuple(values), tuple(errors), s, sigma_s, curves=dict(curves))
    log_chsh(f"{measurement} (E = {', '.join(f'{v:+.3f}' for v in values)})")
    return measurement


def chsh_plan(scenario: ScenarioConfig) -> List[SweepPlan]:
    """Signal fixed at H, V, D, A; idler swept over the CHSH grid"""
    angles = tuple(scenario.chsh_sweep_start_deg + i * scenario.chsh_sweep_step_deg
                   for i in range(scenario.chsh_sweep_points))
    return [
        SweepPlan(Arm.SIGNAL, basis, angles, scenario.integration_time_per_point_s,
                  scenario.lcpr_max_span_deg, scenario.min_sweep_points)
        for basis in (Basis.H, Basis.V, Basis.D, Basis.A)
    ]


def _fit_or_none(records: Sequence[CountRecord], window: CoincidenceWindow) -> Optional[CorrelationCurveFit]:
    try:
        return fit_curve(records, window)
    except (FitConvergenceError, DegenerateDataError) as e:
        log_warning(f"Curve fit failed: {e}")
        return None


def measure_chsh(scenario: ScenarioConfig, thermal: Optional[ThermalState] = None,
                 seed: Optional[int] = None, stream_keys: Sequence[int] = (),
                 point: Optional[LaserOperatingPoint] = None, noiseless: bool = False,
                 state: Optional[TwoPhotonState] = None) -> ChshMeasurement:
    """Four sweeps, their fits, and the CHSH extraction"""
    thermal = thermal if thermal is not None else _nominal_thermal(scenario)
    point = point if point is not None else resolve_operating_point(scenario, thermal.payload_temperature)

    curves: Dict[Basis, CorrelationCurve] = {}
    for plan_index, plan in enumerate(chsh_plan(scenario)):
        records = run_sweep(scenario, plan, thermal, seed, (*stream_keys, plan_index), point, noiseless, state)
        curves[plan.fixed_setting] = CorrelationCurve(plan, tuple(records), _fit_or_none(records, scenario.window))

    measurement = extract_chsh(curves, scenario.settings_offset_deg, scenario.window,
                               scenario.chsh_b_deg, scenario.chsh_b_prime_deg)
    visibilities = None
    if all(curve.fit is not None for curve in curves.values()):
        visibilities = VisibilitySet(*(curves[b].fit.visibility for b in (Basis.H, Basis.V, Basis.D, Basis.A)))
    return ChshMeasurement(
        records=measurement.records,
        correlations=measurement.correlations,
        correlation_errors=measurement.correlation_errors,
        s=measurement.s,
        sigma_s=measurement.sigma_s,
        visibilities=visibilities,
        rates=operating_rates(scenario, point, thermal.payload_temperature),
        point=point,
        curves=curves,
    )


def survey_plan(scenario: ScenarioConfig) -> SweepPlan:
    """Short D/A sweep used to read the visibility at one laser setting"""
    angles = tuple(scenario.survey_sweep_start_deg + i * scenario.survey_sweep_step_deg
                   for i in range(scenario.survey_sweep_points))
    return SweepPlan(Arm.SIGNAL, Basis.D, angles, scenario.survey_integration_time_s,
                     scenario.lcpr_max_span_deg, scenario.min_sweep_points)


def _survey_point(scenario: ScenarioConfig, plan: SweepPlan, current: float, temperature: float,
                  seed: int, keys: Tuple[int, int]) -> float:
    thermal = ThermalState(time=0.0, payload_temperature=temperature, heater_on=False,
                           illumination=Illumination.SUN)
    point = LaserOperatingPoint(current, temperature)
    records = run_sweep(scenario, plan, thermal, seed, (STREAM_SURVEY, *keys), point)
    try:
        return fit_curve(records, scenario.window).visibility
    except SimulationError as e:
        log_warning(f"Survey point {point}: {e}")
        return 0.0


def survey_heatmap(scenario: ScenarioConfig, current_grid: Sequence[float],
                   temperature_grid: Sequence[float], seed: Optional[int] = None,
                   workers: int = 1) -> ModeHopMap:
    """Measured D/A visibility over (temperature, current), as a loadable map"""
    currents = [float(c) for c in current_grid]
    temperatures = [float(t) for t in temperature_grid]
    if not currents or not temperatures:
        raise ConfigError("Survey grids must be non-empty")
    if currents != sorted(set(currents)) or temperatures != sorted(set(temperatures)):
        raise ConfigError("Survey grids must be strictly increasing")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    seed = scenario.seed if seed is None else seed
    plan = survey_plan(scenario)

    jobs = [(i, j) for i in range(len(temperatures)) for j in range(len(currents))]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        values = list(executor.map(
            lambda ij: _survey_point(scenario, plan, currents[ij[1]], temperatures[ij[0]], seed, ij), jobs
        ))
    grid = np.clip(np.array(values).reshape(len(temperatures), len(currents)), 0.0, 1.0)
    power = tuple(pump_power(c, scenario.mode_hop_map) for c in currents)
    log_sweep(f"Survey done: {len(temperatures)} x {len(currents)} points, "
              f"visibility {grid.min():.3f}..{grid.max():.3f}")
    return ModeHopMap(tuple(currents), tuple(temperatures), grid, power)
