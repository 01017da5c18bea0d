"""
Two-photon polarization algebra: states, projections, correlations, CHSH.

Density matrices are 4x4 over the basis {HH, HV, VH, VV} (signal first).
Angles are degrees at the API boundary and radians inside.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from core.errors import ConfigError, DegenerateSettingError, ZeroTotalError
from core.state import AnalyzerSetting, Arm, Basis, VisibilitySet

STATE_TOLERANCE = 1e-12

# Idler sweep used to read visibilities off analytic correlation curves;
# the 0.5° grid contains every extremum of the H/V/D/A curves.
VISIBILITY_SWEEP_DEG = np.arange(0.0, 180.0, 0.5)

_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])


@dataclass(frozen=True, eq=False)
class TwoPhotonState:
    """Density operator of the signal/idler polarization pair"""
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ConfigError(f"rho must be 4x4, got {rho.shape}")
        if abs(np.trace(rho) - 1.0) > STATE_TOLERANCE:
            raise ConfigError(f"trace(rho) = {np.trace(rho).real:.15f}, expected 1")
        if np.max(np.abs(rho - rho.conj().T)) > STATE_TOLERANCE:
            raise ConfigError("rho is not Hermitian")
        if np.min(np.linalg.eigvalsh(rho)) < -STATE_TOLERANCE:
            raise ConfigError("rho is not positive semidefinite")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    def __str__(self):
        diag = ", ".join(f"{p:.3f}" for p in np.real(np.diag(self.rho)))
        return f"TwoPhotonState(diag=[{diag}], HH-VV={self.rho[0, 3]:.3f})"


def make_state(delta_phi: float, v_hv: float = 1.0, v_da: float = 1.0) -> TwoPhotonState:
    """General source state: Bell phase delta_phi with colored noise and dephasing.

    w = (1 - v_hv) / 2 of the population sits in HV/VH, the HH-VV coherence
    is damped by lambda = 2 v_da / (1 + v_hv). With delta_phi = pi the H/V and
    D/A sweep visibilities are exactly v_hv and v_da.
    """
    if not math.isfinite(delta_phi):
        raise ConfigError(f"delta_phi must be finite, got {delta_phi}")
    if not 0.0 <= v_hv <= 1.0:
        raise ConfigError(f"v_hv={v_hv} outside [0, 1]")
    colored = 0.5 * (1.0 - v_hv)
    damping = 2.0 * v_da / (1.0 + v_hv)
    if not 0.0 <= damping <= 1.0:
        raise ConfigError(f"v_da={v_da} not reachable with v_hv={v_hv}")

    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = rho[3, 3] = 0.5 * (1.0 - colored)
    rho[1, 1] = rho[2, 2] = 0.5 * colored
    coherence = 0.5 * damping * (1.0 - colored) * complex(math.cos(delta_phi), -math.sin(delta_phi))
    rho[0, 3] = coherence
    rho[3, 0] = coherence.conjugate()
    return TwoPhotonState(rho)


def make_bell_state(delta_phi: float) -> TwoPhotonState:
    """(|HH> + e^{i delta_phi}|VV>)/sqrt(2); delta_phi = pi gives |Phi->"""
    return make_state(delta_phi)


def make_noisy_state(v_hv: float, v_da: float) -> TwoPhotonState:
    """|Phi-> degraded so its H/V and D/A sweep visibilities equal v_hv and v_da"""
    if not 0.0 <= v_da <= v_hv <= 1.0:
        raise ConfigError(f"Need 0 <= v_da <= v_hv <= 1, got v_hv={v_hv}, v_da={v_da}")
    return make_state(math.pi, v_hv, v_da)


def _projector(theta_deg: float) -> np.ndarray:
    theta = math.radians(theta_deg)
    ket = np.array([math.cos(theta), math.sin(theta)])
    return np.outer(ket, ket)


def coincidence_probability(state: TwoPhotonState, setting: AnalyzerSetting) -> float:
    """Tr(rho . P(theta_s) x P(theta_i)) for linear polarizers"""
    projector = np.kron(_projector(setting.theta_signal), _projector(setting.theta_idler))
    probability = float(np.real(np.trace(state.rho @ projector)))
    return min(1.0, max(0.0, probability))


def coincidence_curve(state: TwoPhotonState, fixed_arm: Arm, fixed_deg: float,
                      swept_deg: Iterable[float]) -> np.ndarray:
    """Coincidence probabilities with one arm fixed and the other swept"""
    settings = (
        AnalyzerSetting(fixed_deg, angle) if fixed_arm is Arm.SIGNAL else AnalyzerSetting(angle, fixed_deg)
        for angle in swept_deg
    )
    return np.array([coincidence_probability(state, setting) for setting in settings])


def correlation_e(state: TwoPhotonState, a: float, b: float) -> float:
    """E(a, b) from the four complementary projection probabilities"""
    p_same = (coincidence_probability(state, AnalyzerSetting(a, b))
              + coincidence_probability(state, AnalyzerSetting(a + 90.0, b + 90.0)))
    p_diff = (coincidence_probability(state, AnalyzerSetting(a, b + 90.0))
              + coincidence_probability(state, AnalyzerSetting(a + 90.0, b)))
    total = p_same + p_diff
    if total <= 0.0:
        raise DegenerateSettingError(f"All projection probabilities vanish at a={a}, b={b}")
    return (p_same - p_diff) / total


def chsh_s(state: TwoPhotonState, a: float, a_prime: float, b: float, b_prime: float) -> float:
    """S = E(a,b) + E(a,b') + E(a',b) - E(a',b')"""
    return (correlation_e(state, a, b) + correlation_e(state, a, b_prime)
            + correlation_e(state, a_prime, b) - correlation_e(state, a_prime, b_prime))


def correlation_analytic(v_hv: float, v_da: float, a: float, b: float) -> float:
    """Closed-form E(a, b) of make_noisy_state(v_hv, v_da)"""
    two_a, two_b = math.radians(2.0 * a), math.radians(2.0 * b)
    return v_hv * math.cos(two_a) * math.cos(two_b) - v_da * math.sin(two_a) * math.sin(two_b)


def visibility(c_max: float, c_min: float) -> float:
    """Contrast (c_max - c_min) / (c_max + c_min)"""
    total = c_max + c_min
    if total == 0:
        raise ZeroTotalError("Visibility undefined: c_max + c_min = 0")
    if c_min < 0 or c_max < c_min:
        raise ConfigError(f"Need c_max >= c_min >= 0, got c_max={c_max}, c_min={c_min}")
    return (c_max - c_min) / total


def sweep_visibility(state: TwoPhotonState, fixed_arm: Arm, fixed_deg: float,
                     swept_deg: Sequence[float] = VISIBILITY_SWEEP_DEG) -> float:
    curve = coincidence_curve(state, fixed_arm, fixed_deg, swept_deg)
    return visibility(float(curve.max()), float(curve.min()))


def predicted_visibilities(state: TwoPhotonState) -> VisibilitySet:
    """Visibilities of the four curves with the signal analyzer fixed at H, V, D, A"""
    values = {basis: sweep_visibility(state, Arm.SIGNAL, basis.angle_deg) for basis in Basis}
    return VisibilitySet(values[Basis.H], values[Basis.V], values[Basis.D], values[Basis.A])


def qber_from_visibility(v_mean: float) -> float:
    """Intrinsic QBER (1 - V) / 2"""
    if not 0.0 <= v_mean <= 1.0:
        raise ConfigError(f"v_mean={v_mean} outside [0, 1]")
    return 0.5 * (1.0 - v_mean)


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def key_fraction(qber: float) -> float:
    """Asymptotic BBM92 secret fraction 1 - 2 h2(Q), zero when no key survives"""
    return max(0.0, 1.0 - 2.0 * binary_entropy(qber))


def fidelity_to_bell(state: TwoPhotonState, delta_phi: float = math.pi) -> float:
    target = make_bell_state(delta_phi).rho
    ket = target[:, 0] / math.sqrt(0.5)  # column 0 of |psi><psi| is psi * conj(psi_0)
    return float(np.real(ket.conj() @ state.rho @ ket))


def concurrence(state: TwoPhotonState) -> float:
    """Wootters concurrence"""
    spin_flip = np.kron(_PAULI_Y, _PAULI_Y)
    rho_tilde = spin_flip @ state.rho.conj() @ spin_flip
    weights, vectors = scipy.linalg.eigh(state.rho)
    root = (vectors * np.sqrt(np.clip(weights, 0.0, None))) @ vectors.conj().T
    # root . rho_tilde . root is Hermitian PSD; its eigenvalue roots are the Wootters lambdas
    product = scipy.linalg.eigvalsh(root @ rho_tilde @ root)
    eigenvalues = np.sort(np.sqrt(np.clip(product, 0.0, None)))[::-1]
    return max(0.0, float(eigenvalues[0] - eigenvalues[1] - eigenvalues[2] - eigenvalues[3]))
