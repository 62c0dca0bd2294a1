"""Closed-loop rollouts of a policy pair from a given start state."""

from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np

from ..params import NonPolicyParams, PopulationSpec
from ..trajectory import Trajectory
from ..world import WorldState
from .networks import policy_act

EXTRA_COLUMNS = (
    "ped_speed_cmd", "ped_turn", "ped_gaze", "veh_target", "veh_accel_smoothed",
    "reward_ped", "reward_veh", "step_began", "step_accel", "step_remaining",
    "gaze_eps_deg", "ped_belief_pos", "ped_belief_var", "veh_belief_pos", "veh_belief_var",
    "collision",
)


def _act(policy, obs, spec, deterministic: bool, rng: np.random.Generator) -> np.ndarray:
    if policy is None:
        return rng.uniform(spec.low, spec.high)
    return policy_act(policy, obs, deterministic, rng)


def rollout(
    env,
    ped_policy,
    veh_policy,
    init_state: WorldState,
    horizon: float,
    reps: int,
    rng: np.random.Generator,
    population: PopulationSpec | None = None,
    params: NonPolicyParams | Sequence[NonPolicyParams] | None = None,
    deterministic: bool = False,
) -> list[Trajectory]:
    """Simulate ``reps`` episodes for at most ``horizon`` seconds each.

    Every trajectory holds the start state plus one sample per step, so a
    2 s horizon at dt = 0.1 gives at most 20 samples. ``params`` may be one
    value for all reps or one per rep; ``None`` policies act uniformly at
    random. The environment's rng is replaced by ``rng``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if isinstance(params, NonPolicyParams) or params is None:
        per_rep = [params] * reps
    else:
        per_rep = list(params)
        if len(per_rep) != reps:
            raise ValueError("need one parameter set per rep")
    env.rng = rng
    n_samples = max(1, int(round(horizon / env.config.dt)))
    out = []
    for rep in range(reps):
        o_p, o_v = env.reset(init_state=init_state, params=per_rep[rep], population=population)
        states = [env.state]
        extras = {k: [math.nan] for k in EXTRA_COLUMNS}
        _record_beliefs(env, extras, first=True)
        while len(states) < n_samples:
            a_p = _act(ped_policy, o_p, env.ped_spec, deterministic, rng)
            a_v = _act(veh_policy, o_v, env.veh_spec, deterministic, rng)
            res = env.step(a_p, a_v)
            states.append(env.state)
            info = res.info
            extras["ped_speed_cmd"].append(float(a_p[0]))
            extras["ped_turn"].append(float(a_p[1]))
            extras["ped_gaze"].append(float(a_p[2]) if len(a_p) > 2 else 0.0)
            extras["veh_target"].append(info["veh_target"])
            extras["veh_accel_smoothed"].append(info["veh_accel_smoothed"])
            extras["reward_ped"].append(res.reward_ped)
            extras["reward_veh"].append(res.reward_veh)
            extras["step_began"].append(float(info["step_began"]))
            extras["step_accel"].append(math.nan if info["step_accel"] is None else info["step_accel"])
            extras["step_remaining"].append(math.nan if info["step_remaining"] is None else info["step_remaining"])
            extras["gaze_eps_deg"].append(info["gaze_eps_deg"])
            extras["collision"].append(float(info["collision"]))
            _record_beliefs(env, extras)
            o_p, o_v = res.obs_ped, res.obs_veh
            if res.done:
                break
        out.append(Trajectory.from_states(states, extras))
    return out


def _record_beliefs(env, extras: dict[str, list], first: bool = False) -> None:
    for name, belief in (("ped", env.ped_belief), ("veh", env.veh_belief)):
        pos = math.nan if belief is None else belief.position
        var = math.nan if belief is None else belief.pos_var
        if first:
            extras[f"{name}_belief_pos"][0] = pos
            extras[f"{name}_belief_var"][0] = var
        else:
            extras[f"{name}_belief_pos"].append(pos)
            extras[f"{name}_belief_var"].append(var)


def trajectories_to_rows(trajs: Sequence[Trajectory], label: str = "") -> list[dict[str, Any]]:
    """Long-format rows (one per rep and sample) for CSV export."""
    rows = []
    for rep, tr in enumerate(trajs):
        d = tr.to_dict()
        extras = d.pop("extras", {})
        for k in range(len(tr)):
            row = {"label": label, "rep": rep}
            row.update({name: values[k] for name, values in d.items()})
            row.update({name: values[k] for name, values in extras.items()})
            rows.append(row)
    return rows
