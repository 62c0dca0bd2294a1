"""Behavioural-cloning baseline: per-agent MLP regression of next actions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping, Sequence

import numpy as np
import torch
from torch.nn import functional as F

from ..env import ped_action_spec, veh_action_spec
from ..observe import build_ped_observation, build_veh_observation
from ..params import NonPolicyParams, PopulationSpec
from ..variants import ModelVariant
from ..world import wrap_angle
from .networks import DeterministicPolicy


@dataclass
class BCConfig:
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 1e-3
    ped_epochs: int = 200
    veh_epochs: int = 15000
    batch_size: int = 256

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.ped_epochs < 1 or self.veh_epochs < 1:
            raise ValueError("epochs must be positive")
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr and batch_size must be positive")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def bc_fit(
    obs: np.ndarray,
    act: np.ndarray,
    low,
    high,
    epochs: int,
    rng: np.random.Generator,
    hidden: Sequence[int] = (64, 64),
    lr: float = 1e-3,
    batch_size: int = 256,
) -> tuple[DeterministicPolicy, list[float]]:
    """Minimise mean squared action error with Adam; returns the per-epoch mean loss."""
    obs = np.asarray(obs, dtype=np.float32)
    act = np.asarray(act, dtype=np.float32)
    if obs.ndim != 2 or len(obs) == 0:
        raise ValueError("demonstrations must be a non-empty (n, obs_dim) array")
    if act.ndim == 1:
        act = act[:, None]
    if len(act) != len(obs):
        raise ValueError("observation and action counts differ")
    torch.manual_seed(int(rng.integers(2**31 - 1)))
    net = DeterministicPolicy(obs.shape[1], low, high, hidden)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    X, Y = torch.from_numpy(obs), torch.from_numpy(act)
    n = len(X)
    curve = []
    for _ in range(epochs):
        perm = torch.from_numpy(rng.permutation(n))
        total = 0.0
        for start in range(0, n, batch_size):
            idx = perm[start:start + batch_size]
            loss = F.mse_loss(net(X[idx]), Y[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        curve.append(total / n)
    net.eval()
    return net, curve


def bc_train(
    demonstrations: Mapping[str, tuple[np.ndarray, np.ndarray]],
    config: BCConfig,
    rng: np.random.Generator,
) -> tuple[DeterministicPolicy, DeterministicPolicy, dict[str, list[float]]]:
    """One regressor per agent; ``demonstrations`` maps 'pedestrian'/'vehicle' to (obs, action)."""
    for key in ("pedestrian", "vehicle"):
        if key not in demonstrations or len(demonstrations[key][0]) == 0:
            raise ValueError(f"no {key} demonstrations")
    ps, vs = ped_action_spec(ModelVariant.NC), veh_action_spec(ModelVariant.NC)
    ped, ped_curve = bc_fit(*demonstrations["pedestrian"], ps.low, ps.high, config.ped_epochs, rng,
                            config.hidden, config.lr, config.batch_size)
    veh, veh_curve = bc_fit(*demonstrations["vehicle"], vs.low, vs.high, config.veh_epochs, rng,
                            config.hidden, config.lr, config.batch_size)
    return ped, veh, {"pedestrian": ped_curve, "vehicle": veh_curve}


def reference_params() -> tuple[PopulationSpec, NonPolicyParams]:
    """Mid-range spec and matching individual values used as constant BC features."""
    spec = PopulationSpec.midpoint()
    own = NonPolicyParams(spec.mu_nu_ped, spec.mu_nu_veh, spec.mu_w_ped, spec.mu_w_veh)
    return spec, own


def bc_demonstrations(trajectories: Sequence[Any]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """(obs, next action) pairs in the unconstrained layout from recorded trajectories.

    Pedestrian action: next speed and heading change; vehicle action: the
    acceleration that reproduces the next recorded speed.
    """
    spec, own = reference_params()
    ps, vs = ped_action_spec(ModelVariant.NC), veh_action_spec(ModelVariant.NC)
    ped_obs, ped_act, veh_obs, veh_act = [], [], [], []
    for traj in trajectories:
        traj = getattr(traj, "traj", traj)
        dt = traj.dt
        for k in range(len(traj) - 1):
            s = replace(traj.state_at(k), t=float(traj.t[k] - traj.t[0]))
            ped_obs.append(build_ped_observation(s, None, None, own, spec, ModelVariant.NC))
            veh_obs.append(build_veh_observation(s, None, own, spec, ModelVariant.NC))
            turn = wrap_angle(traj.ped_heading[k + 1] - traj.ped_heading[k])
            ped_act.append(ps.clip([traj.ped_speed[k + 1], turn]))
            veh_act.append(vs.clip([(traj.veh_speed[k + 1] - traj.veh_speed[k]) / dt]))
    return {
        "pedestrian": (np.array(ped_obs), np.array(ped_act)),
        "vehicle": (np.array(veh_obs), np.array(veh_act)),
    }
