import math

import pytest

from crossing_marl.env import CrossingEnv, EnvConfig
from crossing_marl.params import NonPolicyParams, PopulationSpec
from crossing_marl.rewards import (
    COLLISION_PENALTY,
    NONYIELD_PENALTY,
    OFFROAD_PENALTY,
    RewardFlags,
    arrival_reward,
    ped_step_reward,
    veh_step_reward,
)
from crossing_marl.world import OutcomeKind, WorldState

SPEC = PopulationSpec.midpoint()
PARAMS = NonPolicyParams(0.05, 0.05, 0.2, 3.0)


def run_scripted(env, init, ped_action, veh_action, max_steps=400):
    env.reset(init, PARAMS, SPEC)
    rows = []
    for _ in range(max_steps):
        res = env.step(ped_action, veh_action)
        rows.append(res)
        if res.done:
            break
    return rows


def test_arrival_at_ten_seconds():
    assert arrival_reward(10.0) == 35.0


def test_pedestrian_components():
    r, flags = ped_step_reward(2.0, 0.1, -0.05, True, False, False, RewardFlags())
    assert (r.move, r.walk, r.off, r.arrive, r.collision) == (0.1, -0.05, OFFROAD_PENALTY, 0.0, 0.0)
    assert not flags.ped_done


def test_rewards_stop_after_arrival():
    _, flags = ped_step_reward(4.0, 0.1, 0.0, False, False, True, RewardFlags())
    again, _ = ped_step_reward(4.1, 0.1, 0.0, False, False, True, flags)
    assert again.total == 0.0


def test_nonyield_fires_once():
    r1, flags = veh_step_reward(1.0, True, False, False, RewardFlags())
    r2, _ = veh_step_reward(1.1, True, False, False, flags)
    assert r1.nonyield == NONYIELD_PENALTY and r2.nonyield == 0.0


def test_collision_dominates():
    r, flags = ped_step_reward(1.0, 0.1, -1.0, True, True, True, RewardFlags())
    assert r.total == COLLISION_PENALTY and flags.ped_collided


class TestScriptedEpisodes:
    def test_clean_crossing_totals(self):
        # vehicle starts inside the yield zone with the pedestrian at the kerb: one non-yield penalty
        env = CrossingEnv(EnvConfig(variant="NC"))
        init = WorldState(ped_x=0.0, ped_y=-3.0, ped_speed=1.0, veh_x=-5.0, veh_speed=10.0)
        rows = run_scripted(env, init, [1.0, 0.0], [0.0])
        out = rows[-1].outcome
        assert out.kind == OutcomeKind.BOTH_ARRIVED
        assert out.veh_arrived_at == pytest.approx(0.8)
        ped_total = sum(r.reward_ped for r in rows)
        veh_total = sum(r.reward_veh for r in rows)
        moved = sum(r.info["ped_reward"].move for r in rows)
        assert moved == pytest.approx(env.state.ped_y + 3.0, abs=1e-12)
        assert ped_total == pytest.approx(moved + arrival_reward(out.ped_arrived_at), abs=1e-12)
        assert veh_total == pytest.approx(NONYIELD_PENALTY + arrival_reward(0.8), abs=1e-12)
        assert sum(r.info["entered_violation"] for r in rows) == 1
        assert sum(r.info["ped_reward"].arrive != 0 for r in rows) == 1
        assert sum(r.info["veh_reward"].arrive != 0 for r in rows) == 1

    def test_vehicle_without_pedestrian_nearby_is_not_penalised(self):
        env = CrossingEnv(EnvConfig(variant="NC"))
        init = WorldState(ped_x=0.0, ped_y=-8.0, ped_speed=1.0, veh_x=-20.0, veh_speed=10.0)
        rows = run_scripted(env, init, [1.0, 0.0], [0.0])
        assert sum(r.info["veh_reward"].nonyield for r in rows) == 0.0
        veh_arrival = [r.reward_veh for r in rows if r.reward_veh != 0.0]
        assert veh_arrival == [pytest.approx(arrival_reward(2.3))]

    def test_collision_episode(self):
        env = CrossingEnv(EnvConfig(variant="NC"))
        init = WorldState(ped_x=0.0, ped_y=-0.5, ped_speed=0.0, veh_x=-12.0, veh_speed=10.0)
        rows = run_scripted(env, init, [0.0, 0.0], [0.0])
        assert rows[-1].outcome.kind == OutcomeKind.COLLISION
        assert rows[-1].reward_ped == COLLISION_PENALTY
        assert rows[-1].reward_veh == COLLISION_PENALTY
        assert sum(r.info["collision"] for r in rows) == 1

    def test_offroad_and_effort_accumulate(self):
        # walk diagonally across away from the crosswalk under the motor constraint
        env = CrossingEnv(EnvConfig(variant="MC"))
        init = WorldState(ped_x=5.0, ped_y=-2.0, ped_speed=1.0, veh_x=-24.0, veh_speed=0.0)
        rows = run_scripted(env, init, [1.2, 0.0], [0.0], max_steps=120)
        off = sum(r.info["ped_reward"].off for r in rows)
        walk = sum(r.info["ped_reward"].walk for r in rows)
        on_road = sum(1 for r in rows if r.info["ped_reward"].off != 0)
        assert off == pytest.approx(OFFROAD_PENALTY * on_road, abs=1e-12)
        assert on_road > 0 and walk < 0
        assert sum(r.info["step_began"] for r in rows if r.ped_active) >= 2
        assert all(math.isfinite(r.reward_ped) for r in rows)

    def test_pedestrian_reward_zero_after_arrival(self):
        env = CrossingEnv(EnvConfig(variant="NC"))
        init = WorldState(ped_x=0.0, ped_y=-2.0, ped_speed=1.0, veh_x=-24.0, veh_speed=1.0)
        rows = run_scripted(env, init, [1.5, 0.0], [0.0])
        k = next(i for i, r in enumerate(rows) if r.info["ped_reward"].arrive != 0)
        assert all(r.reward_ped == 0.0 and not r.ped_active for r in rows[k + 1:])
        assert rows[k].ped_terminal
