"""
Constants: source, detector, optics, orbit and run defaults.
Units are part of every name.

Opening angles are drawn uniformly over the solid-angle cap by default.
Drawing them uniformly in angle instead weights small angles more and
gives a geometric efficiency of about 0.055 for the default layout, above
the 0.04 the payload optics are specified for.
"""

import math

# Pump laser and crystals
PUMP_WAVELENGTH_NM = 405.0
PUMP_LINEWIDTH_MHZ = 160.0
BEAM_FWHM_X_UM = 800.0  # Wide axis of the pump spot
BEAM_FWHM_Y_UM = 400.0
CRYSTAL_CUT_ANGLE_DEG = 28.8
CRYSTAL_LENGTH_MM = 6.0
CRYSTAL_REFRACTIVE_INDEX = 1.66  # Ordinary index near 800 nm, not published
TILT_PHASE_COEFFICIENT_RAD_PER_URAD = math.pi / 600.0  # V >= cos(pi/6) at +-100 urad
MAX_TILT_DETUNING_URAD = 10_000.0
WAVELENGTH_SPLIT_NM = 50.0  # Signal ~760 nm, idler ~867 nm
WAVELENGTH_BAND_NM = 10.0  # +- band sampled around the nominal pair

# Brightness (generated pairs, before geometric and detector losses)
BRIGHTNESS_PAIRS_PER_S_PER_MW = 44_000.0  # ~2200 detected pairs/s at 27 mW with the default layout
INTRINSIC_VISIBILITY_HV = 0.975

# Mode-hop map defaults (synthetic survey)
MAP_CURRENTS_MA = tuple(float(c) for c in range(30, 47))
MAP_TEMPERATURES_C = tuple(16.0 + 0.5 * i for i in range(12))  # 16.0 .. 21.5
MAP_PEAK_VISIBILITY = 0.88
MAP_BAND_VISIBILITY = 0.30
MAP_BAND_WIDTH_MA = 1.5
MAP_BAND_PERIOD_MA = 6.0
MAP_BAND_DRIFT_MA_PER_C = 0.8
MAP_BAND_OFFSET_MA = 34.2  # 30 mA falls into a band just above 17 degC

# Pump power vs current (piecewise linear with a plateau)
LASER_THRESHOLD_MA = 15.0
LASER_SLOPE_MW_PER_MA = 1.8  # 30 mA -> 27 mW
LASER_PLATEAU_START_MA = 40.0
LASER_PLATEAU_SLOPE_MW_PER_MA = 0.3

# Detectors (GM-APD)
DETECTOR_EFFICIENCY = 0.45
DARK_COUNT_RATE_PER_S = 500.0
DETECTOR_ACTIVE_DIAMETER_UM = 500.0
BREAKDOWN_VOLTAGE_AT_REF_V = 110.0
BREAKDOWN_VOLTAGE_SLOPE_V_PER_C = 0.05
NOMINAL_OVERVOLTAGE_V = 5.0
DETECTOR_REFERENCE_TEMPERATURE_C = 20.0
EFFICIENCY_LOSS_PER_C = 0.02  # Fractional loss per degC of untracked bias error
BIAS_TEMPERATURE_RANGE_C = (-20.0, 40.0)

# Coincidence counting
COINCIDENCE_WINDOW_NS = 4.84
SINGLES_PER_PAIR = 160.0  # Per channel, before the polarizer
POLARIZER_SINGLES_TRANSMISSION = 0.5

# Collection geometry (no lenses)
MAX_OPENING_ANGLE_DEG = 0.3
DETECTOR_DISTANCE_MM = 100.0
OPENING_ANGLE_DENSITY = "solid_angle"  # "angle" gives ~0.055 on the default layout
DISTANCE_REFERENCE = "source_center"  # or "crystal_exit"
RATE_EFFICIENCY_SAMPLES = 1_000_000  # Monte Carlo run behind the count rates, once per layout
MC_CHUNK_SAMPLES = 100_000
MC_MIN_SAMPLES = 10_000
HIT_MAP_BINS = 64
HIT_MAP_EXTENT_UM = 1500.0

# Orbit and thermal environment
ORBIT_PERIOD_MIN = 90.0
AMBIENT_MIN_C = -5.0
AMBIENT_MAX_C = 10.0
ECLIPSE_FRACTION = 0.37
FULL_SUN_AMBIENT_C = 24.0
FULL_SUN_INTERVALS_H = ((144.0, 244.0),)  # 100 h of continuous illumination

# Heater
HEATER_POWER_W = 2.5
BAND_LOW_C = 15.0
BAND_HIGH_C = 28.0
HEATER_HYSTERESIS_C = 3.0
HEATER_CYCLE_GAP_S = 120.0
THERMAL_CAPACITANCE_J_PER_C = 900.0
CONDUCTANCE_TO_BUS_W_PER_C = 0.15
THERMAL_STEP_S = 10.0
MAX_THERMAL_STEP_S = 10.0
INITIAL_PAYLOAD_TEMPERATURE_C = 2.5

# Analyzer sweeps
LCPR_MAX_SPAN_DEG = 150.0
MIN_SWEEP_POINTS = 8
INTEGRATION_TIME_PER_POINT_S = 0.6  # Calibrated for sigma_S ~ 0.055
CHSH_A_DEG = 0.0
CHSH_A_PRIME_DEG = 45.0
CHSH_B_DEG = -22.5
CHSH_B_PRIME_DEG = 22.5
CHSH_SWEEP_START_DEG = -22.5
CHSH_SWEEP_STEP_DEG = 11.25
CHSH_SWEEP_POINTS = 13
DA_SETTING_ERROR_DEG = 0.0
OPERATING_TEMPERATURE_C = 17.0
SURVEY_SWEEP_START_DEG = 0.0
SURVEY_SWEEP_STEP_DEG = 15.0
SURVEY_SWEEP_POINTS = 9
SURVEY_INTEGRATION_TIME_S = 0.5

# Curve fitting
FIT_MAX_EVALUATIONS = 2000
FIT_PHASE_STARTS = 4
ANGLE_MATCH_TOLERANCE_DEG = 1e-6

# Mission scheduling
MEASUREMENT_INTERVAL_S = 5000.0  # Not a divisor of the orbit; epochs walk through the orbital phase
SETTLE_TIME_S = 3600.0
MISSION_DURATION_S = 14 * 86_400.0

# Output
OUTPUT_FORMATS = ("csv", "json")
DEFAULT_SEED = 20190617
