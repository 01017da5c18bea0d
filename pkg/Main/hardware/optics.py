"""
Lens-free collection geometry: Monte Carlo ray tracing of SPDC pairs.

Frame: the pump travels along the axial coordinate; the crystal occupies
axial positions [0, L] mm with its exit face at L. Transverse coordinates
(y, z) are in um: y follows the wide beam axis (beam_fwhm_x_um), z the
narrow one (beam_fwhm_y_um). Both detectors are modelled unfolded on the
pump axis at the same distance; a photon counts when it lands inside the
active circle.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from config.settings import (
    CRYSTAL_LENGTH_MM,
    CRYSTAL_REFRACTIVE_INDEX,
    BEAM_FWHM_X_UM,
    BEAM_FWHM_Y_UM,
    MAX_OPENING_ANGLE_DEG,
    DETECTOR_ACTIVE_DIAMETER_UM,
    DETECTOR_DISTANCE_MM,
    OPENING_ANGLE_DENSITY,
    DISTANCE_REFERENCE,
    PUMP_WAVELENGTH_NM,
    WAVELENGTH_SPLIT_NM,
    WAVELENGTH_BAND_NM,
    MC_CHUNK_SAMPLES,
    MC_MIN_SAMPLES,
    HIT_MAP_BINS,
    HIT_MAP_EXTENT_UM,
)
from core.errors import ConfigError
from core.state import HitOutcome
from hardware.laser import signal_idler_wavelengths
from utils.export import write_csv
from utils.logger import log_mc
from utils.seeds import STREAM_GEOMETRY, get_rng

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))
ANGLE_DENSITIES = ("angle", "solid_angle")
DISTANCE_REFERENCES = ("source_center", "crystal_exit")
EFFICIENCY_COLUMNS = ("bucket", "count", "fraction")
HIT_MAP_COLUMNS = ("y_um", "z_um", "signal", "coincidence")


@dataclass(frozen=True)
class OpticalLayout:
    """Crystal, pump spot and detector geometry"""
    crystal_length_mm: float = CRYSTAL_LENGTH_MM
    crystal_refractive_index: float = CRYSTAL_REFRACTIVE_INDEX
    beam_fwhm_x_um: float = BEAM_FWHM_X_UM
    beam_fwhm_y_um: float = BEAM_FWHM_Y_UM
    max_opening_angle_deg: float = MAX_OPENING_ANGLE_DEG
    active_diameter_um: float = DETECTOR_ACTIVE_DIAMETER_UM
    detector_distance_mm: float = DETECTOR_DISTANCE_MM
    opening_angle_density: str = OPENING_ANGLE_DENSITY
    distance_reference: str = DISTANCE_REFERENCE
    pump_wavelength_nm: float = PUMP_WAVELENGTH_NM
    wavelength_split_nm: float = WAVELENGTH_SPLIT_NM
    wavelength_band_nm: float = WAVELENGTH_BAND_NM

    def __post_init__(self):
        for name in ("crystal_length_mm", "crystal_refractive_index", "active_diameter_um",
                     "detector_distance_mm", "pump_wavelength_nm"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        # Zero beam width / opening angle are the collinear, point-source limits
        for name in ("beam_fwhm_x_um", "beam_fwhm_y_um", "max_opening_angle_deg", "wavelength_band_nm"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.max_opening_angle_deg >= 90.0:
            raise ConfigError("max_opening_angle_deg must be < 90")
        if self.crystal_refractive_index * math.sin(math.radians(self.max_opening_angle_deg)) >= 1.0:
            raise ConfigError("max_opening_angle_deg exceeds the total-internal-reflection limit")
        if self.opening_angle_density not in ANGLE_DENSITIES:
            raise ConfigError(f"opening_angle_density must be one of {ANGLE_DENSITIES}")
        if self.distance_reference not in DISTANCE_REFERENCES:
            raise ConfigError(f"distance_reference must be one of {DISTANCE_REFERENCES}")
        if self.detector_plane_mm <= self.crystal_length_mm:
            raise ConfigError("Detector plane must lie beyond the crystal exit face")

    @property
    def detector_plane_mm(self) -> float:
        """Axial position of the detector plane"""
        if self.distance_reference == "source_center":
            return 0.5 * self.crystal_length_mm + self.detector_distance_mm
        return self.crystal_length_mm + self.detector_distance_mm

    @property
    def beam_sigma_um(self) -> Tuple[float, float]:
        return self.beam_fwhm_x_um * FWHM_TO_SIGMA, self.beam_fwhm_y_um * FWHM_TO_SIGMA


@dataclass(frozen=True, eq=False)
class RayPair:
    """One SPDC emission: birth point, internal directions, wavelengths"""
    birth_position: Tuple[float, float, float]  # (axial mm, y um, z um)
    signal_direction: np.ndarray  # unit (axial, y, z), inside the crystal
    idler_direction: np.ndarray
    signal_wavelength: float  # nm
    idler_wavelength: float


@dataclass(frozen=True, eq=False)
class RayBatch:
    """Column arrays for n emissions; idler azimuth is phi + pi"""
    axial_mm: np.ndarray
    y_um: np.ndarray
    z_um: np.ndarray
    theta_rad: np.ndarray  # internal opening angle
    phi_rad: np.ndarray  # signal azimuth
    signal_wavelength_nm: np.ndarray
    idler_wavelength_nm: np.ndarray

    def __len__(self):
        return len(self.axial_mm)


@dataclass(frozen=True)
class EfficiencyEstimate:
    """Pair classification counts and the both-hit fraction"""
    n_samples: int
    both_hit: int
    only_signal: int
    only_idler: int
    neither: int
    efficiency: float
    std_error: float

    def __post_init__(self):
        if self.both_hit + self.only_signal + self.only_idler + self.neither != self.n_samples:
            raise ConfigError("Classification counts do not sum to n_samples")

    def __str__(self):
        return f"efficiency={self.efficiency:.5f} ± {self.std_error:.5f} (n={self.n_samples})"


@dataclass(frozen=True, eq=False)
class HitMap:
    """Detector-plane histograms of signal landing points (um)"""
    edges_um: np.ndarray
    signal_counts: np.ndarray  # every traced signal photon
    coincidence_counts: np.ndarray  # signal photons whose idler also hit


@dataclass(frozen=True)
class GridEstimate:
    """Deterministic grid integration result"""
    efficiency: float
    discretization_error: float
    points: int


def _sample_opening_angles(layout: OpticalLayout, uniform: np.ndarray) -> np.ndarray:
    alpha = math.radians(layout.max_opening_angle_deg)
    if layout.opening_angle_density == "angle":
        return uniform * alpha
    # Inverse CDF of a uniform distribution over the solid-angle cap
    return np.arccos(1.0 - uniform * (1.0 - math.cos(alpha)))


def sample_ray_batch(layout: OpticalLayout, n: int, rng: np.random.Generator) -> RayBatch:
    """Vectorized emissions from one crystal, drawn in a fixed order from rng"""
    sigma_y, sigma_z = layout.beam_sigma_um
    axial = rng.uniform(0.0, layout.crystal_length_mm, n)
    y = rng.normal(0.0, 1.0, n) * sigma_y
    z = rng.normal(0.0, 1.0, n) * sigma_z
    theta = _sample_opening_angles(layout, rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    nominal_signal, _ = signal_idler_wavelengths(layout.pump_wavelength_nm, layout.wavelength_split_nm)
    signal = nominal_signal + rng.uniform(-layout.wavelength_band_nm, layout.wavelength_band_nm, n)
    idler = 1.0 / (1.0 / layout.pump_wavelength_nm - 1.0 / signal)
    return RayBatch(axial, y, z, theta, phi, signal, idler)


def _direction(theta: float, phi: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi)])


def sample_ray_pair(layout: OpticalLayout, rng: np.random.Generator) -> RayPair:
    """One emission; same distributions as sample_ray_batch"""
    batch = sample_ray_batch(layout, 1, rng)
    theta, phi = float(batch.theta_rad[0]), float(batch.phi_rad[0])
    return RayPair(
        birth_position=(float(batch.axial_mm[0]), float(batch.y_um[0]), float(batch.z_um[0])),
        signal_direction=_direction(theta, phi),
        idler_direction=_direction(theta, phi + math.pi),
        signal_wavelength=float(batch.signal_wavelength_nm[0]),
        idler_wavelength=float(batch.idler_wavelength_nm[0]),
    )


def exit_angle(theta_in, refractive_index: float):
    """Snell's law at a flat exit face normal to the pump: sin(out) = n sin(in). Radians."""
    sine = refractive_index * np.sin(theta_in)
    if np.any(sine >= 1.0):
        raise ConfigError("Internal angle beyond the total-internal-reflection limit")
    return np.arcsin(sine)


def refract_at_exit(ray_direction: np.ndarray, internal_angle: float, layout: OpticalLayout) -> np.ndarray:
    """External unit direction of a ray leaving through the exit face.

    internal_angle (rad) is the angle to the face normal inside the crystal;
    ray_direction only supplies the azimuth, so an on-axis direction needs
    internal_angle = 0.
    """
    direction = np.asarray(ray_direction, dtype=float)
    transverse = direction[1:]
    norm_t = np.linalg.norm(transverse)
    theta_out = float(exit_angle(internal_angle, layout.crystal_refractive_index))
    if norm_t == 0.0:
        if internal_angle != 0.0:
            raise ConfigError("Azimuth undefined for an on-axis direction with a non-zero internal angle")
        return np.array([1.0, 0.0, 0.0])
    unit = transverse / norm_t
    return np.array([math.cos(theta_out), math.sin(theta_out) * unit[0], math.sin(theta_out) * unit[1]])


def _landing_points(axial, y, z, theta_in, phi, layout: OpticalLayout):
    """Detector-plane (y, z) in um for rays with internal angle theta_in and azimuth phi"""
    theta_out = exit_angle(theta_in, layout.crystal_refractive_index)
    inside_mm = (layout.crystal_length_mm - axial) * np.tan(theta_in)
    outside_mm = (layout.detector_plane_mm - layout.crystal_length_mm) * np.tan(theta_out)
    radial_um = 1000.0 * (inside_mm + outside_mm)
    return y + radial_um * np.cos(phi), z + radial_um * np.sin(phi)


def _hits(batch_axial, batch_y, batch_z, theta, phi, layout: OpticalLayout):
    radius_sq = (0.5 * layout.active_diameter_um) ** 2
    sy, sz = _landing_points(batch_axial, batch_y, batch_z, theta, phi, layout)
    iy, iz = _landing_points(batch_axial, batch_y, batch_z, theta, phi + math.pi, layout)
    return sy * sy + sz * sz <= radius_sq, iy * iy + iz * iz <= radius_sq, (sy, sz)


def _classify(signal_hit: bool, idler_hit: bool) -> HitOutcome:
    if signal_hit and idler_hit:
        return HitOutcome.BOTH
    if signal_hit:
        return HitOutcome.SIGNAL_ONLY
    if idler_hit:
        return HitOutcome.IDLER_ONLY
    return HitOutcome.NEITHER


def trace_to_detector(pair: RayPair, layout: OpticalLayout) -> HitOutcome:
    """Propagate both photons to the detector plane and classify the pair"""
    axial, y, z = pair.birth_position
    outcomes = []
    for direction in (pair.signal_direction, pair.idler_direction):
        theta = math.acos(max(-1.0, min(1.0, direction[0] / np.linalg.norm(direction))))
        phi = math.atan2(direction[2], direction[1])
        ly, lz = _landing_points(axial, y, z, theta, phi, layout)
        outcomes.append(ly * ly + lz * lz <= (0.5 * layout.active_diameter_um) ** 2)
    return _classify(bool(outcomes[0]), bool(outcomes[1]))


def _trace_chunk(layout: OpticalLayout, n: int, seed: int, index: int) -> Tuple[int, int, int, int]:
    batch = sample_ray_batch(layout, n, get_rng(seed, STREAM_GEOMETRY, index))
    signal_hit, idler_hit, _ = _hits(batch.axial_mm, batch.y_um, batch.z_um,
                                     batch.theta_rad, batch.phi_rad, layout)
    both = int(np.count_nonzero(signal_hit & idler_hit))
    only_signal = int(np.count_nonzero(signal_hit & ~idler_hit))
    only_idler = int(np.count_nonzero(~signal_hit & idler_hit))
    return both, only_signal, only_idler, n - both - only_signal - only_idler


def _chunk_sizes(n_samples: int, chunk_samples: int) -> List[int]:
    full, rest = divmod(n_samples, chunk_samples)
    return [chunk_samples] * full + ([rest] if rest else [])


def estimate_geometric_efficiency(layout: OpticalLayout, n_samples: int, seed: int,
                                  workers: int = 1,
                                  chunk_samples: int = MC_CHUNK_SAMPLES) -> EfficiencyEstimate:
    """Monte Carlo both-hit fraction with binomial standard error.

    Samples are split into fixed-size chunks, chunk i drawing from
    derive_seed(seed, STREAM_GEOMETRY, i); chunk counts are summed, so the
    result is identical for any number of workers.
    """
    if n_samples < MC_MIN_SAMPLES:
        raise ConfigError(f"n_samples must be >= {MC_MIN_SAMPLES}, got {n_samples}")
    if workers < 1 or chunk_samples < 1:
        raise ConfigError("workers and chunk_samples must be >= 1")
    sizes = _chunk_sizes(n_samples, chunk_samples)
    log_mc(f"Tracing {n_samples} pairs in {len(sizes)} chunk(s) on {workers} worker(s), seed={seed}")

    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(lambda item: _trace_chunk(layout, item[1], seed, item[0]),
                                    enumerate(sizes)))
    both, only_signal, only_idler, neither = (sum(column) for column in zip(*results))
    efficiency = both / n_samples
    estimate = EfficiencyEstimate(
        n_samples=n_samples,
        both_hit=both,
        only_signal=only_signal,
        only_idler=only_idler,
        neither=neither,
        efficiency=efficiency,
        std_error=math.sqrt(efficiency * (1.0 - efficiency) / n_samples),
    )
    log_mc(f"Geometric {estimate}")
    return estimate


def hit_map(layout: OpticalLayout, n_samples: int, seed: int,
            bins: int = HIT_MAP_BINS, extent_um: float = HIT_MAP_EXTENT_UM) -> HitMap:
    """Detector-plane histograms (signal arm) for plotting"""
    edges = np.linspace(-extent_um, extent_um, bins + 1)
    signal_counts = np.zeros((bins, bins), dtype=np.int64)
    coincidence_counts = np.zeros((bins, bins), dtype=np.int64)
    for index, size in enumerate(_chunk_sizes(n_samples, MC_CHUNK_SAMPLES)):
        batch = sample_ray_batch(layout, size, get_rng(seed, STREAM_GEOMETRY, index))
        signal_hit, idler_hit, (sy, sz) = _hits(batch.axial_mm, batch.y_um, batch.z_um,
                                                batch.theta_rad, batch.phi_rad, layout)
        signal_counts += np.histogram2d(sy, sz, bins=(edges, edges))[0].astype(np.int64)
        both = signal_hit & idler_hit
        coincidence_counts += np.histogram2d(sy[both], sz[both], bins=(edges, edges))[0].astype(np.int64)
    return HitMap(edges, signal_counts, coincidence_counts)


def _grid_fraction(layout: OpticalLayout, n_axial: int, n_transverse: int,
                   n_angle: int, n_azimuth: int) -> float:
    """Equal-weight quantile-midpoint grid over every sampled dimension"""
    def midpoints(n):
        return (np.arange(n) + 0.5) / n

    sigma_y, sigma_z = layout.beam_sigma_um
    axial = midpoints(n_axial) * layout.crystal_length_mm
    normal_quantiles = norm.ppf(midpoints(n_transverse))
    theta = _sample_opening_angles(layout, midpoints(n_angle))
    phi = midpoints(n_azimuth) * 2.0 * math.pi
    y, z, az = np.meshgrid(normal_quantiles * sigma_y, normal_quantiles * sigma_z, phi, indexing="ij")

    both = 0
    for a in axial:
        for t in theta:
            signal_hit, idler_hit, _ = _hits(a, y, z, t, az, layout)
            both += int(np.count_nonzero(signal_hit & idler_hit))
    return both / (n_axial * n_transverse * n_transverse * n_angle * n_azimuth)


def grid_efficiency(layout: OpticalLayout, n_axial: int = 4, n_transverse: int = 64,
                    n_angle: int = 48, n_azimuth: int = 32) -> GridEstimate:
    """Deterministic both-hit fraction; error is the change from the half-resolution grid"""
    fine = _grid_fraction(layout, n_axial, n_transverse, n_angle, n_azimuth)
    coarse = _grid_fraction(layout, max(1, n_axial // 2), max(1, n_transverse // 2),
                            max(1, n_angle // 2), max(1, n_azimuth // 2))
    return GridEstimate(fine, abs(fine - coarse), n_axial * n_transverse ** 2 * n_angle * n_azimuth)


def efficiency_rows(estimate: EfficiencyEstimate, grid: Optional[GridEstimate] = None) -> List[Dict[str, object]]:
    """One row per classification bucket, the standard error, and the grid result when given"""
    n = estimate.n_samples
    rows = [
        {"bucket": name, "count": count, "fraction": count / n}
        for name, count in (
            ("both", estimate.both_hit),
            ("signal_only", estimate.only_signal),
            ("idler_only", estimate.only_idler),
            ("neither", estimate.neither),
        )
    ]
    rows.append({"bucket": "std_error", "count": n, "fraction": estimate.std_error})
    if grid is not None:
        rows.append({"bucket": "grid", "count": grid.points, "fraction": grid.efficiency})
        rows.append({"bucket": "grid_error", "count": grid.points, "fraction": grid.discretization_error})
    return rows


def hit_map_rows(grid: HitMap) -> List[Dict[str, object]]:
    """One row per bin: centre (um), signal and coincidence counts"""
    centres = 0.5 * (grid.edges_um[:-1] + grid.edges_um[1:])
    return [
        {"y_um": float(centres[i]), "z_um": float(centres[j]),
         "signal": int(grid.signal_counts[i, j]), "coincidence": int(grid.coincidence_counts[i, j])}
        for i in range(len(centres)) for j in range(len(centres))
    ]


def write_efficiency_table(estimate: EfficiencyEstimate, path: str,
                           grid: Optional[GridEstimate] = None) -> int:
    return write_csv(path, EFFICIENCY_COLUMNS, efficiency_rows(estimate, grid))


def write_hit_map(grid: HitMap, path: str) -> int:
    return write_csv(path, HIT_MAP_COLUMNS, hit_map_rows(grid))
