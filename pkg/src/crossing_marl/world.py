"""Ground-truth crossing environment: frame, geometry, transitions, termination.

Frame: the centre of the zebra crossing is the origin. The vehicle drives
along +x at a fixed lateral position; the pedestrian crosses along +y.
Pedestrian heading is measured from the +y axis, positive clockwise
(toward +x), so the walking direction is ``(sin(heading), cos(heading))``.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Any, Mapping, Protocol

import numpy as np

DEFAULT_DT = 0.1


class ValidationError(ValueError):
    """Raised when a world input is out of its domain."""


@dataclass(frozen=True)
class WorldState:
    t: float = 0.0
    ped_x: float = 0.0
    ped_y: float = -3.0
    ped_speed: float = 0.0
    ped_heading: float = 0.0
    gaze_offset: float = 0.0
    veh_x: float = -20.0
    veh_y: float = 0.0
    veh_speed: float = 0.0
    veh_accel: float = 0.0
    n_steps: int = 0

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "WorldState":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in names}
        if "n_steps" in kwargs:
            kwargs["n_steps"] = int(kwargs["n_steps"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SceneGeometry:
    crossing_x: float = 0.0
    crossing_y: float = 0.0
    lane_half_width: float = 1.75
    crossing_half_width_x: float = 2.0
    kerb_y: float = -1.75
    ped_goal_y: float = 1.75
    veh_goal_x: float = 3.0
    veh_lane_y: float = 0.0
    crosswalk_x_extent: float = 2.0
    yield_zone_x_extent: float = 5.0
    yield_ped_x_tol: float = 2.0
    yield_ped_y_tol: float = 3.0
    ped_radius: float = 0.3
    veh_length: float = 4.5
    veh_width: float = 1.8
    max_episode_time: float = 30.0
    # approach zones used for trajectory extraction and initial-state bounds
    veh_upstream: float = 25.0
    veh_downstream: float = 10.0
    ped_gate_x: float = 20.0
    ped_gate_y: float = 5.0
    ped_trunc_x: float = 10.0
    refuge_y_extent: float = 2.0

    def __post_init__(self) -> None:
        positive = (
            "lane_half_width", "crossing_half_width_x", "crosswalk_x_extent",
            "yield_zone_x_extent", "yield_ped_x_tol", "yield_ped_y_tol", "ped_radius",
            "veh_length", "veh_width", "max_episode_time", "veh_upstream",
            "veh_downstream", "ped_gate_x", "ped_gate_y", "ped_trunc_x", "refuge_y_extent",
        )
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(f"scene geometry field {name} must be positive, got {value}")
        if not self.ped_goal_y > self.kerb_y:
            raise ValidationError("ped_goal_y must lie beyond kerb_y")
        if not self.veh_goal_x > self.crossing_x:
            raise ValidationError("veh_goal_x must lie beyond the crossing")

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any] | None) -> "SceneGeometry":
        if not data:
            return cls()
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ValidationError(f"unknown scene geometry keys: {unknown}")
        return cls(**{k: float(v) for k, v in data.items()})

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


class OutcomeKind(str, enum.Enum):
    COLLISION = "Collision"
    BOTH_ARRIVED = "BothArrived"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class EpisodeOutcome:
    kind: OutcomeKind
    t_end: float
    ped_arrived_at: float | None = None
    veh_arrived_at: float | None = None


@dataclass
class ArrivalLog:
    """First times at which each agent satisfied its goal condition."""

    ped_arrived_at: float | None = None
    veh_arrived_at: float | None = None


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ValidationError(f"{name} must be finite, got {value}")


def step_world(
    state: WorldState,
    ped_speed_cmd_effective: float,
    ped_heading_new: float,
    veh_accel_effective: float,
    dt: float = DEFAULT_DT,
    gaze_offset: float | None = None,
) -> WorldState:
    """Advance the true state by one step.

    The pedestrian moves with the given effective speed along the new
    heading. The vehicle uses semi-implicit Euler: speed first (clamped at
    standstill), then position with the updated speed.
    """
    _check_finite(
        ped_speed_cmd_effective=ped_speed_cmd_effective,
        ped_heading_new=ped_heading_new,
        veh_accel_effective=veh_accel_effective,
        dt=dt,
    )
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if gaze_offset is None:
        gaze_offset = state.gaze_offset
    _check_finite(gaze_offset=gaze_offset)

    ped_x = state.ped_x + ped_speed_cmd_effective * math.sin(ped_heading_new) * dt
    ped_y = state.ped_y + ped_speed_cmd_effective * math.cos(ped_heading_new) * dt

    veh_speed = state.veh_speed + veh_accel_effective * dt
    veh_accel = veh_accel_effective
    if veh_speed <= 0.0:
        veh_speed = 0.0
        # no reversing: braking past standstill has no effect
        veh_accel = max(veh_accel_effective, 0.0)
    veh_x = state.veh_x + veh_speed * dt

    n = state.n_steps + 1
    return WorldState(
        t=n * dt,
        ped_x=ped_x,
        ped_y=ped_y,
        ped_speed=ped_speed_cmd_effective,
        ped_heading=ped_heading_new,
        gaze_offset=gaze_offset,
        veh_x=veh_x,
        veh_y=state.veh_y,
        veh_speed=veh_speed,
        veh_accel=veh_accel,
        n_steps=n,
    )


def check_collision(state: WorldState, geom: SceneGeometry) -> bool:
    """Pedestrian disc against the axis-aligned vehicle footprint (closed sets)."""
    half_l = geom.veh_length / 2.0
    half_w = geom.veh_width / 2.0
    dx = state.ped_x - state.veh_x
    dy = state.ped_y - state.veh_y
    nearest_x = min(max(dx, -half_l), half_l)
    nearest_y = min(max(dy, -half_w), half_w)
    gap_sq = (dx - nearest_x) ** 2 + (dy - nearest_y) ** 2
    return gap_sq <= geom.ped_radius**2 * (1.0 + 1e-12)


def ped_at_goal(state: WorldState, geom: SceneGeometry) -> bool:
    return state.ped_y >= geom.ped_goal_y


def veh_at_goal(state: WorldState, geom: SceneGeometry) -> bool:
    return state.veh_x >= geom.veh_goal_x


def check_termination(
    state: WorldState,
    geom: SceneGeometry,
    collision: bool,
    arrivals: ArrivalLog | None = None,
) -> EpisodeOutcome | None:
    """Return the episode outcome if the episode ends at ``state``.

    ``arrivals`` is updated in place with the first time each agent reached
    its goal; arrival is latched, so an agent that has arrived stays arrived.
    """
    if arrivals is None:
        arrivals = ArrivalLog()
    if arrivals.ped_arrived_at is None and ped_at_goal(state, geom):
        arrivals.ped_arrived_at = state.t
    if arrivals.veh_arrived_at is None and veh_at_goal(state, geom):
        arrivals.veh_arrived_at = state.t

    if collision:
        return EpisodeOutcome(OutcomeKind.COLLISION, state.t, arrivals.ped_arrived_at, arrivals.veh_arrived_at)
    if arrivals.ped_arrived_at is not None and arrivals.veh_arrived_at is not None:
        return EpisodeOutcome(OutcomeKind.BOTH_ARRIVED, state.t, arrivals.ped_arrived_at, arrivals.veh_arrived_at)
    if state.t >= geom.max_episode_time - 1e-9:
        return EpisodeOutcome(OutcomeKind.TIMEOUT, state.t, arrivals.ped_arrived_at, arrivals.veh_arrived_at)
    return None


def veh_in_yield_zone(state: WorldState, geom: SceneGeometry) -> bool:
    ahead = geom.crossing_x - state.veh_x
    return 0.0 <= ahead <= geom.yield_zone_x_extent


def ped_in_yield_box(state: WorldState, geom: SceneGeometry) -> bool:
    return (
        abs(state.ped_x - geom.crossing_x) <= geom.yield_ped_x_tol
        and abs(state.ped_y - geom.kerb_y) <= geom.yield_ped_y_tol
    )


def in_yield_trigger_zone(state: WorldState, geom: SceneGeometry) -> bool:
    """Vehicle within the pre-crossing yield zone while a pedestrian waits nearby."""
    return veh_in_yield_zone(state, geom) and ped_in_yield_box(state, geom)


def on_carriageway_offroad(state: WorldState, geom: SceneGeometry) -> bool:
    """Pedestrian on the road between the kerbs but outside the crosswalk."""
    on_road = geom.kerb_y < state.ped_y < geom.ped_goal_y
    return on_road and abs(state.ped_x - geom.crossing_x) > geom.crosswalk_x_extent


def heading_toward(x: float, y: float, target_x: float, target_y: float) -> float:
    """Heading (0 = +y, clockwise positive) pointing from (x, y) at the target."""
    return math.atan2(target_x - x, target_y - y)


class InitialStateSampler(Protocol):
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...


INIT_FIELDS = ("ped_x", "ped_y", "ped_speed", "veh_x", "veh_speed")


def initial_state_bounds(geom: SceneGeometry) -> dict[str, tuple[float, float]]:
    return {
        "ped_x": (geom.crossing_x - geom.ped_trunc_x, geom.crossing_x + geom.ped_trunc_x),
        "ped_y": (geom.kerb_y - geom.ped_gate_y, geom.ped_goal_y - 1e-6),
        "ped_speed": (0.0, 3.0),
        "veh_x": (geom.crossing_x - geom.veh_upstream, geom.veh_goal_x - 1e-6),
        "veh_speed": (0.0, 15.0),
    }


def sample_initial_state(
    init_kde: InitialStateSampler,
    rng: np.random.Generator,
    geom: SceneGeometry | None = None,
    max_tries: int = 1000,
) -> WorldState:
    """Draw a physically valid start state from the joint initial-condition KDE.

    Draws outside the approach zones or with negative speeds are rejected
    and redrawn; after ``max_tries`` rejections a RuntimeError is raised.
    """
    geom = geom or SceneGeometry()
    bounds = initial_state_bounds(geom)
    for _ in range(max_tries):
        draw = np.asarray(init_kde.sample(1, rng), dtype=float).reshape(-1)
        values = dict(zip(INIT_FIELDS, draw))
        if all(lo <= values[k] <= hi for k, (lo, hi) in bounds.items()):
            return WorldState(
                t=0.0,
                ped_x=float(values["ped_x"]),
                ped_y=float(values["ped_y"]),
                ped_speed=float(values["ped_speed"]),
                ped_heading=heading_toward(values["ped_x"], values["ped_y"], geom.crossing_x, geom.crossing_y),
                gaze_offset=0.0,
                veh_x=float(values["veh_x"]),
                veh_y=geom.veh_lane_y,
                veh_speed=float(values["veh_speed"]),
                veh_accel=0.0,
                n_steps=0,
            )
    raise RuntimeError(f"initial-condition KDE produced no valid state in {max_tries} draws")


def wrap_angle(angle: float) -> float:
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


__all__ = [
    "ArrivalLog",
    "DEFAULT_DT",
    "EpisodeOutcome",
    "OutcomeKind",
    "SceneGeometry",
    "ValidationError",
    "WorldState",
    "check_collision",
    "check_termination",
    "heading_toward",
    "in_yield_trigger_zone",
    "initial_state_bounds",
    "on_carriageway_offroad",
    "sample_initial_state",
    "step_world",
    "wrap_angle",
]
