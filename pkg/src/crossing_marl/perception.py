"""Noisy visual perception of the other road user.

Three layers: angular retinal noise turned into a positional standard
deviation via the visual angle below the horizon, an eccentricity-dependent
acuity factor (pedestrian only), and a constant-velocity Kalman filter that
turns the noisy position stream into a belief over position and speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .variants import AgentKind, ModelVariant
from .world import WorldState

SIGMA_MAX = 50.0
SIGMA_FLOOR = 1e-3
PROCESS_ACCEL_STD = 0.5
PED_EYE_HEIGHT = 1.6
VEH_EYE_HEIGHT = 1.2
# guards the distance term when agents overlap
MIN_DISTANCE = 0.05


@dataclass(frozen=True)
class RetinalNoiseParams:
    nu: float
    eye_height: float = PED_EYE_HEIGHT

    def __post_init__(self) -> None:
        if self.nu < 0 or not math.isfinite(self.nu):
            raise ValueError(f"nu must be a finite non-negative angle, got {self.nu}")
        if self.eye_height <= 0:
            raise ValueError(f"eye_height must be positive, got {self.eye_height}")


@dataclass(frozen=True)
class AcuityParams:
    a_k: float = 0.9729
    r_2k: float = 1.084
    r_ek: float = 7.633
    d_gf0: float = 33163.2
    delta: float = 1e-5


DEFAULT_ACUITY = AcuityParams()


def positional_noise_sigma(d_l: float, d: float, params: RetinalNoiseParams, sigma_max: float = SIGMA_MAX) -> float:
    """Std of the perceived longitudinal position of the other agent.

    ``d_l`` is the other agent's distance to the crossing point along its own
    travel axis and ``d`` the distance between the agents.
    """
    if not d > 0:
        raise ValueError(f"inter-agent distance must be positive, got {d}")
    if not math.isfinite(d_l):
        raise ValueError(f"longitudinal distance must be finite, got {d_l}")
    h = params.eye_height
    angle = math.atan(h / d) + params.nu
    if angle >= math.pi / 2 - 1e-9:
        return sigma_max
    sigma = abs(d_l) * (1.0 - h / (d * math.tan(angle)))
    return min(max(sigma, 0.0), sigma_max)


def rgc_density(eps_deg: float, params: AcuityParams = DEFAULT_ACUITY) -> float:
    e = abs(eps_deg)
    return params.d_gf0 * (
        params.a_k * (1.0 + e / params.r_2k) ** -2 + (1.0 - params.a_k) * math.exp(-e / params.r_ek)
    )


def relative_acuity(eps_deg: float, params: AcuityParams = DEFAULT_ACUITY) -> float:
    """Acuity at eccentricity ``eps_deg`` relative to the fovea (1 at 0 deg)."""
    return math.sqrt(rgc_density(eps_deg, params) / rgc_density(0.0, params))


def modulated_sigma(sigma_x: float, eps_deg: float, params: AcuityParams = DEFAULT_ACUITY) -> float:
    if sigma_x < 0:
        raise ValueError(f"sigma_x must be non-negative, got {sigma_x}")
    return sigma_x * (1.0 / relative_acuity(eps_deg, params) + params.delta)


@dataclass
class KalmanBelief:
    """Belief over (position, speed) along the observed agent's travel axis."""

    mean: np.ndarray
    cov: np.ndarray = field(default_factory=lambda: np.eye(2))

    @property
    def position(self) -> float:
        return float(self.mean[0])

    @property
    def speed(self) -> float:
        return float(self.mean[1])

    @property
    def pos_var(self) -> float:
        return float(self.cov[0, 0])

    @property
    def speed_var(self) -> float:
        return float(self.cov[1, 1])


def kalman_init(
    true_pos: float,
    true_speed: float,
    sigma_pos0: float,
    sigma_speed0: float,
    rng: np.random.Generator,
) -> KalmanBelief:
    if sigma_pos0 < 0 or sigma_speed0 < 0:
        raise ValueError("initial standard deviations must be non-negative")
    mean = np.array([
        true_pos + sigma_pos0 * rng.standard_normal(),
        true_speed + sigma_speed0 * rng.standard_normal(),
    ])
    cov = np.diag([sigma_pos0**2, sigma_speed0**2]).astype(float)
    return KalmanBelief(mean, cov)


def _check_psd(cov: np.ndarray) -> None:
    if cov.shape != (2, 2) or not np.all(np.isfinite(cov)):
        raise ValueError("covariance must be a finite 2x2 matrix")
    a, b, c, d = float(cov[0, 0]), float(cov[0, 1]), float(cov[1, 0]), float(cov[1, 1])
    tol = 1e-9 * max(1.0, abs(a), abs(b), abs(c), abs(d))
    if abs(b - c) > tol:
        raise ValueError("covariance must be symmetric")
    if a < -tol or d < -tol or a * d - b * c < -tol * max(1.0, abs(a), abs(d)):
        raise ValueError("covariance must be positive semi-definite")


def transition_matrices(dt: float, process_accel_std: float) -> tuple[np.ndarray, np.ndarray]:
    """Constant-velocity transition and discrete white-acceleration noise."""
    F = np.array([[1.0, dt], [0.0, 1.0]])
    G = np.array([[0.5 * dt * dt], [dt]])
    Q = (process_accel_std**2) * (G @ G.T)
    return F, Q


def kalman_update(
    belief: KalmanBelief,
    obs_pos: float,
    sigma_obs: float,
    dt: float,
    process_accel_std: float = PROCESS_ACCEL_STD,
) -> KalmanBelief:
    """One predict/correct cycle with a scalar position measurement.

    Written out element-wise for the 2x2 case (this runs every sim step).
    The covariance update is the Joseph form, so it stays symmetric PSD.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_psd(belief.cov)
    sigma_obs = max(sigma_obs, SIGMA_FLOOR)
    q = process_accel_std * process_accel_std
    g0, g1 = 0.5 * dt * dt, dt

    p, v = float(belief.mean[0]), float(belief.mean[1])
    (a, b), (_, d) = belief.cov
    # predict
    p = p + dt * v
    a, b, d = a + 2 * dt * b + dt * dt * d + q * g0 * g0, b + dt * d + q * g0 * g1, d + q * g1 * g1

    # correct
    r = sigma_obs * sigma_obs
    s = a + r
    k0, k1 = a / s, b / s
    innov = obs_pos - p
    p, v = p + k0 * innov, v + k1 * innov
    # Joseph form with H = [1, 0]: (I - K H) P (I - K H)^T + r K K^T
    m00, m10 = 1.0 - k0, -k1
    a_new = m00 * m00 * a + r * k0 * k0
    b_new = m00 * (m10 * a + b) + r * k0 * k1
    d_new = m10 * m10 * a + 2 * m10 * b + d + r * k1 * k1
    return KalmanBelief(np.array([p, v]), np.array([[a_new, b_new], [b_new, d_new]]))


def gaze_eccentricity_deg(state: WorldState) -> float:
    """Angle between the pedestrian's gaze line and the bearing to the vehicle."""
    bearing = math.atan2(state.veh_x - state.ped_x, state.veh_y - state.ped_y)
    gaze = state.ped_heading + state.gaze_offset
    diff = (bearing - gaze + math.pi) % (2 * math.pi) - math.pi
    return math.degrees(diff)


def inter_agent_distance(state: WorldState) -> float:
    return math.hypot(state.veh_x - state.ped_x, state.veh_y - state.ped_y)


@dataclass(frozen=True)
class Observation1D:
    position: float
    sigma: float
    true_position: float


def observe_other(
    state: WorldState,
    observer: AgentKind,
    noise: RetinalNoiseParams,
    variant: ModelVariant,
    rng: np.random.Generator,
    gaze_eps: float | None = None,
    acuity: AcuityParams = DEFAULT_ACUITY,
    crossing_x: float = 0.0,
    crossing_y: float = 0.0,
) -> Observation1D:
    """Noisy longitudinal position of the other agent, as seen by ``observer``.

    The pedestrian sees the vehicle's x; the driver sees the pedestrian's y.
    Only the pedestrian's noise is scaled by gaze eccentricity, and the
    scaled value saturates at ``SIGMA_MAX``. When
    ``gaze_eps`` is None it is computed from the state's heading and gaze.
    """
    if not ModelVariant.parse(variant).visual:
        raise ValueError("observe_other is only used by the visually constrained variants")
    d = max(inter_agent_distance(state), MIN_DISTANCE)
    if observer is AgentKind.PEDESTRIAN:
        true_pos = state.veh_x
        d_l = state.veh_x - crossing_x
        sigma = positional_noise_sigma(d_l, d, noise)
        eps = gaze_eccentricity_deg(state) if gaze_eps is None else gaze_eps
        sigma = min(modulated_sigma(sigma, eps, acuity), SIGMA_MAX)
    else:
        true_pos = state.ped_y
        d_l = state.ped_y - crossing_y
        sigma = positional_noise_sigma(d_l, d, noise)
    return Observation1D(true_pos + sigma * rng.standard_normal(), sigma, true_pos)
