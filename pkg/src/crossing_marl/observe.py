"""Normalised observation vectors for both agents under each variant."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .motor import MIN_SPEED, STEP_DURATION_EXPONENT, StepState
from .params import RANGES, NonPolicyParams, PopulationSpec
from .perception import SIGMA_MAX, KalmanBelief
from .variants import AgentKind, ModelVariant
from .world import WorldState

T_RANGE = (0.0, 30.0)
X_RANGE = (-25.0, 25.0)
PED_Y_RANGE = (-10.0, 10.0)
PED_SPEED_RANGE = (0.0, 3.0)
PED_VY_RANGE = (-3.0, 3.0)
VEH_SPEED_RANGE = (0.0, 15.0)
ACCEL_RANGE = (-5.0, 3.0)
ANGLE_RANGE = (-math.pi, math.pi)
GAZE_RANGE = (-math.pi / 2, math.pi / 2)
LOG_VAR_RANGE = (0.0, math.log1p(SIGMA_MAX**2))
STEP_TIME_RANGE = (0.0, MIN_SPEED**STEP_DURATION_EXPONENT)


@dataclass(frozen=True)
class Feature:
    name: str
    lo: float
    hi: float
    log1p: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "min": self.lo, "max": self.hi, "log1p": self.log1p}


class ObservationLayout:
    """Ordered features with min-max bounds; a pure function of (agent, variant)."""

    def __init__(self, agent: AgentKind, variant: ModelVariant, features: list[Feature]):
        self.agent = agent
        self.variant = variant
        self.features = tuple(features)
        self.names = tuple(f.name for f in features)
        self.lo = np.array([f.lo for f in features])
        self.span = np.array([f.hi - f.lo for f in features])
        self.log_mask = np.array([f.log1p for f in features])

    def __len__(self) -> int:
        return len(self.features)

    def normalise(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (len(self),):
            raise ValueError(f"expected {len(self)} raw features, got {raw.shape}")
        raw = np.where(self.log_mask, np.log1p(np.maximum(raw, 0.0)), raw)
        return np.clip((raw - self.lo) / self.span, 0.0, 1.0)

    def schema(self) -> dict:
        return {
            "agent": self.agent.value,
            "variant": self.variant.value,
            "features": [f.as_dict() for f in self.features],
        }


def _param_features(prefix: str, names: tuple[str, ...]) -> list[Feature]:
    out = []
    for name in names:
        mean_range, _ = RANGES[name]
        out.append(Feature(f"{prefix}{name}", *mean_range))
    return out


def _pop_features(prefix: str, names: tuple[str, ...]) -> list[Feature]:
    out = []
    for name in names:
        mean_range, std_range = RANGES[name]
        out.append(Feature(f"{prefix}mu_{name}", *mean_range))
        out.append(Feature(f"{prefix}sigma_{name}", *std_range))
    return out


@lru_cache(maxsize=None)
def ped_layout(variant: ModelVariant) -> ObservationLayout:
    variant = ModelVariant.parse(variant)
    f = [
        Feature("t", *T_RANGE),
        Feature("ped_x", *X_RANGE),
        Feature("ped_y", *PED_Y_RANGE),
        Feature("ped_speed", *PED_SPEED_RANGE),
        Feature("ped_heading", *ANGLE_RANGE),
    ]
    if variant.visual:
        f.append(Feature("gaze_offset", *GAZE_RANGE))
    f += [Feature("veh_x", *X_RANGE), Feature("veh_speed", *VEH_SPEED_RANGE)]
    if variant.visual:
        f += [Feature("veh_x_var", *LOG_VAR_RANGE, log1p=True), Feature("veh_speed_var", *LOG_VAR_RANGE, log1p=True)]
    if variant.motor:
        f.append(Feature("step_remaining", *STEP_TIME_RANGE))
    f += _param_features("own_", ("nu_ped", "w_ped"))
    f += _pop_features("veh_pop_", ("nu_veh", "w_veh"))
    return ObservationLayout(AgentKind.PEDESTRIAN, variant, f)


@lru_cache(maxsize=None)
def veh_layout(variant: ModelVariant) -> ObservationLayout:
    variant = ModelVariant.parse(variant)
    f = [
        Feature("t", *T_RANGE),
        Feature("veh_x", *X_RANGE),
        Feature("veh_speed", *VEH_SPEED_RANGE),
        Feature("veh_accel", *ACCEL_RANGE),
    ]
    if variant.motor:
        f.append(Feature("target_accel", *ACCEL_RANGE))
    f += [Feature("ped_x", *X_RANGE), Feature("ped_y", *PED_Y_RANGE), Feature("ped_vy", *PED_VY_RANGE)]
    if variant.visual:
        f += [Feature("ped_y_var", *LOG_VAR_RANGE, log1p=True), Feature("ped_vy_var", *LOG_VAR_RANGE, log1p=True)]
    f.append(Feature("ped_heading", *ANGLE_RANGE))
    f += _param_features("own_", ("nu_veh", "w_veh"))
    f += _pop_features("ped_pop_", ("nu_ped", "w_ped"))
    return ObservationLayout(AgentKind.VEHICLE, variant, f)


def layout_for(agent: AgentKind, variant: ModelVariant) -> ObservationLayout:
    return ped_layout(ModelVariant.parse(variant)) if agent is AgentKind.PEDESTRIAN else veh_layout(ModelVariant.parse(variant))


def build_ped_observation(
    state: WorldState,
    belief: KalmanBelief | None,
    step: StepState | None,
    own: NonPolicyParams,
    other_pop: PopulationSpec,
    variant: ModelVariant,
) -> np.ndarray:
    """Pedestrian observation; the vehicle part comes from ``belief`` when visual."""
    variant = ModelVariant.parse(variant)
    layout = ped_layout(variant)
    if variant.visual and belief is None:
        raise ValueError("visual variants need a Kalman belief over the vehicle")
    if variant.motor and step is None:
        raise ValueError("motor variants need the current gait step")
    raw = [state.t, state.ped_x, state.ped_y, state.ped_speed, state.ped_heading]
    if variant.visual:
        raw.append(state.gaze_offset)
        raw += [belief.position, belief.speed, belief.pos_var, belief.speed_var]
    else:
        raw += [state.veh_x, state.veh_speed]
    if variant.motor:
        raw.append(step.remaining)
    raw += [own.nu_ped, own.w_ped]
    raw += list(other_pop.veh_stats())
    return layout.normalise(np.array(raw))


def build_veh_observation(
    state: WorldState,
    belief: KalmanBelief | None,
    own: NonPolicyParams,
    other_pop: PopulationSpec,
    variant: ModelVariant,
    target_accel: float = 0.0,
) -> np.ndarray:
    variant = ModelVariant.parse(variant)
    layout = veh_layout(variant)
    if variant.visual and belief is None:
        raise ValueError("visual variants need a Kalman belief over the pedestrian")
    raw = [state.t, state.veh_x, state.veh_speed, state.veh_accel]
    if variant.motor:
        raw.append(target_accel)
    if variant.visual:
        raw += [state.ped_x, belief.position, belief.speed, belief.pos_var, belief.speed_var]
    else:
        raw += [state.ped_x, state.ped_y, state.ped_speed * math.cos(state.ped_heading)]
    raw.append(state.ped_heading)
    raw += [own.nu_veh, own.w_veh]
    raw += list(other_pop.ped_stats())
    return layout.normalise(np.array(raw))
