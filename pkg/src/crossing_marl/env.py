"""Two-agent crossing episode: motor/perception constraints wired per variant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import motor, perception
from .observe import build_ped_observation, build_veh_observation, ped_layout, veh_layout
from .params import NonPolicyParams, PopulationSpec, sample_agent_params, sample_population_spec
from .perception import KalmanBelief, RetinalNoiseParams
from .rewards import PedReward, RewardFlags, VehReward, ped_step_reward, veh_step_reward
from .variants import AgentKind, ModelVariant
from .world import (
    DEFAULT_DT,
    ArrivalLog,
    EpisodeOutcome,
    SceneGeometry,
    WorldState,
    check_collision,
    check_termination,
    on_carriageway_offroad,
    ped_in_yield_box,
    sample_initial_state,
    step_world,
    veh_in_yield_zone,
    wrap_angle,
)


@dataclass(frozen=True)
class ActionSpec:
    names: tuple[str, ...]
    low: np.ndarray
    high: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.names)

    def clip(self, action: np.ndarray) -> np.ndarray:
        action = np.asarray(action, dtype=float).reshape(-1)
        if action.shape != (self.dim,):
            raise ValueError(f"expected action of size {self.dim}, got {action.shape}")
        return np.clip(action, self.low, self.high)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.low + self.high)


PED_SPEED_BOUNDS = (0.0, 3.0)
PED_TURN_BOUNDS = (-0.5, 0.5)
GAZE_BOUNDS = (-math.pi / 2, math.pi / 2)
VEH_ACCEL_BOUNDS = (-5.0, 3.0)


def ped_action_spec(variant: ModelVariant) -> ActionSpec:
    variant = ModelVariant.parse(variant)
    names = ["speed", "turn"]
    bounds = [PED_SPEED_BOUNDS, PED_TURN_BOUNDS]
    if variant.visual:
        names.append("gaze")
        bounds.append(GAZE_BOUNDS)
    b = np.array(bounds, dtype=float)
    return ActionSpec(tuple(names), b[:, 0], b[:, 1])


def veh_action_spec(variant: ModelVariant) -> ActionSpec:
    b = np.array([VEH_ACCEL_BOUNDS], dtype=float)
    return ActionSpec(("target_accel",), b[:, 0], b[:, 1])


@dataclass
class EnvConfig:
    variant: ModelVariant = ModelVariant.NC
    dt: float = DEFAULT_DT
    geom: SceneGeometry = field(default_factory=SceneGeometry)
    gait: motor.GaitParams = field(default_factory=motor.GaitParams)
    ped_eye_height: float = perception.PED_EYE_HEIGHT
    veh_eye_height: float = perception.VEH_EYE_HEIGHT
    process_accel_std: float = perception.PROCESS_ACCEL_STD
    # initial belief spread over the other agent's speed
    ped_speed_std: float = 0.3
    veh_speed_std: float = 2.0

    def __post_init__(self) -> None:
        self.variant = ModelVariant.parse(self.variant)
        if self.dt <= 0:
            raise ValueError("dt must be positive")


@dataclass
class StepResult:
    obs_ped: np.ndarray
    obs_veh: np.ndarray
    reward_ped: float
    reward_veh: float
    ped_terminal: bool
    veh_terminal: bool
    ped_active: bool
    veh_active: bool
    done: bool
    outcome: EpisodeOutcome | None
    info: dict[str, Any]


class CrossingEnv:
    """Single episode stepper. Owns its state; pass an rng per episode stream."""

    def __init__(self, config: EnvConfig | None = None, init_model: Any = None, rng: np.random.Generator | None = None):
        self.config = config or EnvConfig()
        self.init_model = init_model
        self.rng = rng if rng is not None else np.random.default_rng()
        self.ped_spec = ped_action_spec(self.config.variant)
        self.veh_spec = veh_action_spec(self.config.variant)
        self.ped_obs_dim = len(ped_layout(self.config.variant))
        self.veh_obs_dim = len(veh_layout(self.config.variant))
        self.state: WorldState | None = None

    @property
    def variant(self) -> ModelVariant:
        return self.config.variant

    def reset(
        self,
        init_state: WorldState | None = None,
        params: NonPolicyParams | None = None,
        population: PopulationSpec | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Start an episode.

        Without ``population`` a fresh spec is drawn (training mode); without
        ``params`` individual values are drawn from the spec. Without
        ``init_state`` the start is drawn from the initial-condition model.
        """
        cfg = self.config
        rng = self.rng
        self.population = population if population is not None else sample_population_spec(rng)
        self.params = params if params is not None else sample_agent_params(self.population, rng)
        if init_state is None:
            if self.init_model is None:
                raise ValueError("reset needs an init_state or an initial-condition model")
            init_state = sample_initial_state(self.init_model, rng, cfg.geom)
        self.state = replace(init_state, t=0.0, n_steps=0)
        self.arrivals = ArrivalLog()
        self.flags = RewardFlags()
        self.veh_zone_entered = False
        self.gait_step: motor.StepState | None = None
        if cfg.variant.motor:
            # an already-finished step so the first decision starts a new one
            v = self.state.ped_speed
            self.gait_step = motor.StepState(0.0, 0.0, v, motor.step_duration(v, cfg.gait.min_speed))
        self.veh_accel_smoothed = self.state.veh_accel
        self.veh_target = self.state.veh_accel
        self.ped_noise = RetinalNoiseParams(self.params.nu_ped, cfg.ped_eye_height)
        self.veh_noise = RetinalNoiseParams(self.params.nu_veh, cfg.veh_eye_height)
        self.ped_belief: KalmanBelief | None = None
        self.veh_belief: KalmanBelief | None = None
        if cfg.variant.visual:
            self._init_beliefs()
        self.outcome: EpisodeOutcome | None = None
        self.ped_return = 0.0
        self.veh_return = 0.0
        return self.observations()

    def _init_beliefs(self) -> None:
        s = self.state
        g = self.config.geom
        d = max(perception.inter_agent_distance(s), perception.MIN_DISTANCE)
        sig_veh = perception.positional_noise_sigma(s.veh_x - g.crossing_x, d, self.ped_noise)
        sig_ped = perception.positional_noise_sigma(s.ped_y - g.crossing_y, d, self.veh_noise)
        self.ped_belief = perception.kalman_init(s.veh_x, s.veh_speed, sig_veh, self.config.veh_speed_std, self.rng)
        self.veh_belief = perception.kalman_init(
            s.ped_y, s.ped_speed * math.cos(s.ped_heading), sig_ped, self.config.ped_speed_std, self.rng
        )

    def observations(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.config.variant
        obs_ped = build_ped_observation(self.state, self.ped_belief, self.gait_step, self.params, self.population, v)
        obs_veh = build_veh_observation(self.state, self.veh_belief, self.params, self.population, v, self.veh_target)
        return obs_ped, obs_veh

    def step(self, ped_action: np.ndarray, veh_action: np.ndarray) -> StepResult:
        if self.state is None or self.outcome is not None:
            raise RuntimeError("call reset() before stepping a finished or fresh environment")
        cfg = self.config
        g = cfg.geom
        s = self.state
        ped_action = self.ped_spec.clip(ped_action)
        veh_action = self.veh_spec.clip(veh_action)

        ped_active = not self.flags.ped_done
        veh_active = not self.flags.veh_done
        effort = 0.0
        step_began = False
        if ped_active:
            speed_cmd, turn = float(ped_action[0]), float(ped_action[1])
            heading = wrap_angle(s.ped_heading + turn)
            gaze = float(ped_action[2]) if cfg.variant.visual else 0.0
            if cfg.variant.motor:
                if self.gait_step.completed:
                    effort = motor.step_onset_penalty(s.ped_speed, speed_cmd, self.params.w_ped, cfg.gait)
                    self.gait_step = motor.begin_step(s.ped_speed, speed_cmd, cfg.gait.min_speed)
                    step_began = True
                self.gait_step, ped_speed, _ = motor.advance_step(self.gait_step, s.ped_speed, cfg.dt)
            else:
                ped_speed = speed_cmd
        else:
            heading, gaze, ped_speed = s.ped_heading, s.gaze_offset, s.ped_speed

        target = float(veh_action[0]) if veh_active else 0.0
        self.veh_target = target
        if cfg.variant.motor:
            self.veh_accel_smoothed = motor.smooth_accel(self.veh_accel_smoothed, target, self.params.w_veh)
            accel = self.veh_accel_smoothed
        else:
            accel = target

        new = step_world(s, ped_speed, heading, accel, cfg.dt, gaze_offset=gaze)
        collided = check_collision(new, g)
        had_ped, had_veh = self.flags.ped_arrived, self.flags.veh_arrived
        outcome = check_termination(new, g, collided, self.arrivals)

        entered_violation = False
        if not self.veh_zone_entered and veh_in_yield_zone(new, g):
            self.veh_zone_entered = True
            entered_violation = ped_in_yield_box(new, g)

        ped_arrived_now = not had_ped and self.arrivals.ped_arrived_at is not None
        veh_arrived_now = not had_veh and self.arrivals.veh_arrived_at is not None
        r_ped, flags = ped_step_reward(
            new.t, new.ped_y - s.ped_y, effort, on_carriageway_offroad(new, g), collided, ped_arrived_now, self.flags
        )
        r_veh, flags = veh_step_reward(new.t, entered_violation, collided, veh_arrived_now, flags)
        self.flags = flags
        self.state = new
        self.outcome = outcome

        gaze_eps = perception.gaze_eccentricity_deg(new)
        if cfg.variant.visual:
            self._update_beliefs(gaze_eps)

        self.ped_return += r_ped.total
        self.veh_return += r_veh.total
        obs_ped, obs_veh = self.observations()
        info = {
            "ped_reward": r_ped,
            "veh_reward": r_veh,
            "veh_target": target,
            "veh_accel_smoothed": accel,
            "step_began": step_began,
            "step_accel": self.gait_step.step_accel if self.gait_step is not None else None,
            "step_remaining": self.gait_step.remaining if self.gait_step is not None else None,
            "gaze_eps_deg": gaze_eps,
            "collision": collided,
            "entered_violation": entered_violation,
        }
        return StepResult(
            obs_ped=obs_ped,
            obs_veh=obs_veh,
            reward_ped=r_ped.total,
            reward_veh=r_veh.total,
            ped_terminal=ped_active and self.flags.ped_done,
            veh_terminal=veh_active and self.flags.veh_done,
            ped_active=ped_active,
            veh_active=veh_active,
            done=outcome is not None,
            outcome=outcome,
            info=info,
        )

    def _update_beliefs(self, gaze_eps: float) -> None:
        cfg = self.config
        g = cfg.geom
        seen_by_ped = perception.observe_other(
            self.state, AgentKind.PEDESTRIAN, self.ped_noise, cfg.variant, self.rng, gaze_eps=gaze_eps,
            crossing_x=g.crossing_x, crossing_y=g.crossing_y,
        )
        seen_by_veh = perception.observe_other(
            self.state, AgentKind.VEHICLE, self.veh_noise, cfg.variant, self.rng,
            crossing_x=g.crossing_x, crossing_y=g.crossing_y,
        )
        self.ped_belief = perception.kalman_update(
            self.ped_belief, seen_by_ped.position, seen_by_ped.sigma, cfg.dt, cfg.process_accel_std
        )
        self.veh_belief = perception.kalman_update(
            self.veh_belief, seen_by_veh.position, seen_by_veh.sigma, cfg.dt, cfg.process_accel_std
        )


__all__ = [
    "ActionSpec",
    "CrossingEnv",
    "EnvConfig",
    "PedReward",
    "StepResult",
    "VehReward",
    "ped_action_spec",
    "veh_action_spec",
]
