"""Motor constraints: ballistic gait steps, walking effort, driver smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

MIN_SPEED = 0.1
LEG_LENGTH = 0.9
STEP_LENGTH_EXPONENT = 0.42
STEP_DURATION_EXPONENT = STEP_LENGTH_EXPONENT - 1.0
STEP_DONE_EPS = 1e-9


@dataclass(frozen=True)
class GaitParams:
    leg_length: float = LEG_LENGTH
    min_speed: float = MIN_SPEED

    def __post_init__(self) -> None:
        if self.leg_length <= 0 or self.min_speed <= 0:
            raise ValueError("leg_length and min_speed must be positive")


@dataclass(frozen=True)
class StepState:
    remaining: float
    step_accel: float
    commanded_speed: float
    step_duration: float

    @property
    def completed(self) -> bool:
        return self.remaining <= STEP_DONE_EPS


def step_duration(v: float, min_speed: float = MIN_SPEED) -> float:
    """Duration of one walking step at speed ``v`` (step length v**0.42 over v)."""
    return max(v, min_speed) ** STEP_DURATION_EXPONENT


def step_length(v: float, min_speed: float = MIN_SPEED) -> float:
    return max(v, min_speed) ** STEP_LENGTH_EXPONENT


def begin_step(v_prev: float, v_cmd: float, min_speed: float = MIN_SPEED) -> StepState:
    """Latch a new ballistic step toward ``v_cmd``.

    The duration is evaluated at the commanded speed, so a step starting
    from standstill still has a finite, well-defined acceleration.
    """
    if v_prev < 0 or v_cmd < 0:
        raise ValueError("walking speeds must be non-negative")
    duration = step_duration(v_cmd, min_speed)
    return StepState(
        remaining=duration,
        step_accel=(v_cmd - v_prev) / duration,
        commanded_speed=v_cmd,
        step_duration=duration,
    )


def advance_step(step: StepState, v_current: float, dt: float) -> tuple[StepState, float, bool]:
    """Integrate the latched acceleration over ``dt`` (or what is left of the step)."""
    active = min(dt, max(step.remaining, 0.0))
    v_next = max(v_current + step.step_accel * active, 0.0)
    remaining = step.remaining - dt
    if remaining <= STEP_DONE_EPS:
        remaining = 0.0
        # land exactly on the command; removes accumulated rounding
        v_next = step.commanded_speed
    new_step = StepState(remaining, step.step_accel, step.commanded_speed, step.step_duration)
    return new_step, v_next, new_step.completed


def inter_leg_angle(v: float, leg_length: float = LEG_LENGTH, min_speed: float = MIN_SPEED) -> float:
    """Angle 2*theta between the legs at mid-stance for speed ``v``.

    Treats the step as the chord of two legs of length ``leg_length``.
    """
    if leg_length <= 0:
        raise ValueError("leg_length must be positive")
    ratio = min(max(step_length(v, min_speed) / (2.0 * leg_length), 0.0), 0.999)
    return 2.0 * math.asin(ratio)


def walking_effort(v_minus: float, v_plus: float, two_theta: float) -> float:
    """Per-unit-mass effort to go from ``v_minus`` to ``v_plus`` in one step."""
    s = math.sin(two_theta)
    if abs(s) < 1e-12:
        raise ValueError("inter-leg angle gives a degenerate step (sin(2 theta) = 0)")
    return (v_minus * math.cos(two_theta) - v_plus) ** 2 / (2.0 * s * s)


def effort_penalty(effort: float, w_ped: float) -> float:
    if effort < 0 or w_ped < 0:
        raise ValueError("effort and w_ped must be non-negative")
    return -w_ped * effort


def step_onset_penalty(v_prev: float, v_cmd: float, w_ped: float, gait: GaitParams = GaitParams()) -> float:
    """Effort penalty charged once when a step toward ``v_cmd`` begins."""
    two_theta = inter_leg_angle(v_cmd, gait.leg_length, gait.min_speed)
    return effort_penalty(walking_effort(v_prev, v_cmd, two_theta), w_ped)


def smooth_accel(a_prev: float, a_target: float, w_veh: float) -> float:
    """First-order lag of the vehicle acceleration toward the driver's target."""
    w = max(w_veh, 1.0)
    return a_prev + (a_target - a_prev) / w
