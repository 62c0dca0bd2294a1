"""Per-step rewards for both agents with one-shot event bookkeeping.

An agent stops receiving rewards once it has arrived or collided; the
pedestrian's forward-progress term therefore ends at arrival.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

ARRIVE_BASE = 40.0
ARRIVE_TIME_COST = 0.5
COLLISION_PENALTY = -40.0
NONYIELD_PENALTY = -30.0
OFFROAD_PENALTY = -0.2


@dataclass(frozen=True)
class PedReward:
    arrive: float = 0.0
    move: float = 0.0
    walk: float = 0.0
    off: float = 0.0
    collision: float = 0.0

    @property
    def total(self) -> float:
        return self.arrive + self.move + self.walk + self.off + self.collision

    def __add__(self, other: "PedReward") -> "PedReward":
        return PedReward(
            self.arrive + other.arrive,
            self.move + other.move,
            self.walk + other.walk,
            self.off + other.off,
            self.collision + other.collision,
        )


@dataclass(frozen=True)
class VehReward:
    arrive: float = 0.0
    nonyield: float = 0.0
    collision: float = 0.0

    @property
    def total(self) -> float:
        return self.arrive + self.nonyield + self.collision

    def __add__(self, other: "VehReward") -> "VehReward":
        return VehReward(
            self.arrive + other.arrive,
            self.nonyield + other.nonyield,
            self.collision + other.collision,
        )


@dataclass(frozen=True)
class RewardBreakdown:
    ped: PedReward = field(default_factory=PedReward)
    veh: VehReward = field(default_factory=VehReward)


@dataclass(frozen=True)
class RewardFlags:
    nonyield_fired: bool = False
    ped_arrived: bool = False
    veh_arrived: bool = False
    ped_collided: bool = False
    veh_collided: bool = False

    @property
    def ped_done(self) -> bool:
        return self.ped_arrived or self.ped_collided

    @property
    def veh_done(self) -> bool:
        return self.veh_arrived or self.veh_collided


def arrival_reward(t: float) -> float:
    return ARRIVE_BASE - ARRIVE_TIME_COST * t


def ped_step_reward(
    t: float,
    dy: float,
    step_effort_penalty: float,
    offroad: bool,
    collided: bool,
    arrived: bool,
    flags: RewardFlags,
) -> tuple[PedReward, RewardFlags]:
    """Pedestrian reward for the step that ended at time ``t``.

    ``step_effort_penalty`` is already signed (<= 0) and is non-zero only on
    steps where a new gait step began.
    """
    if flags.ped_done:
        return PedReward(), flags
    if collided:
        return PedReward(collision=COLLISION_PENALTY), replace(flags, ped_collided=True)
    reward = PedReward(
        move=dy,
        walk=step_effort_penalty,
        off=OFFROAD_PENALTY if offroad else 0.0,
        arrive=arrival_reward(t) if arrived else 0.0,
    )
    if arrived:
        flags = replace(flags, ped_arrived=True)
    return reward, flags


def veh_step_reward(
    t: float,
    entered_yield_violation: bool,
    collided: bool,
    arrived: bool,
    flags: RewardFlags,
) -> tuple[VehReward, RewardFlags]:
    if flags.veh_done:
        return VehReward(), flags
    if collided:
        return VehReward(collision=COLLISION_PENALTY), replace(flags, veh_collided=True)
    nonyield = 0.0
    if entered_yield_violation and not flags.nonyield_fired:
        nonyield = NONYIELD_PENALTY
        flags = replace(flags, nonyield_fired=True)
    arrive = 0.0
    if arrived:
        arrive = arrival_reward(t)
        flags = replace(flags, veh_arrived=True)
    return VehReward(arrive=arrive, nonyield=nonyield), flags
