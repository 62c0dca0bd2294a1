"""Soft actor-critic for two simultaneously learning agents.

Each agent has its own actor, twin critics with Polyak-averaged targets, a
learned entropy temperature and a replay buffer. One training iteration is
``env_steps_per_iteration`` environment steps followed by one gradient
update per agent.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .buffer import Batch, ReplayBuffer
from .networks import DEFAULT_HIDDEN, GaussianPolicy, QNetwork, policy_act

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class SACConfig:
    iterations: int = 20000
    lr: float = 1e-3
    gamma: float = 0.995
    batch_size: int = 8192
    buffer_capacity: int = 1_000_000
    tau: float = 0.005
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    init_alpha: float = 1.0
    # None means -(action dimension)
    target_entropy: float | None = None
    env_steps_per_iteration: int = 1
    random_steps: int = 1000
    update_after: int = 256
    curve_window: int = 20

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        for name in ("lr", "batch_size", "buffer_capacity", "tau", "init_alpha", "env_steps_per_iteration", "curve_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.tau > 1.0:
            raise ValueError("tau must be at most 1")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def _soft_update(target: nn.Module, source: nn.Module, tau: float) -> None:
    with torch.no_grad():
        for pt, ps in zip(target.parameters(), source.parameters()):
            pt.mul_(1.0 - tau).add_(ps, alpha=tau)


class SACAgent:
    def __init__(self, obs_dim: int, low, high, cfg: SACConfig):
        self.cfg = cfg
        self.policy = GaussianPolicy(obs_dim, low, high, cfg.hidden)
        act_dim = self.policy.act_dim
        self.q1 = QNetwork(obs_dim, act_dim, cfg.hidden)
        self.q2 = QNetwork(obs_dim, act_dim, cfg.hidden)
        self.q1_target = copy.deepcopy(self.q1)
        self.q2_target = copy.deepcopy(self.q2)
        for p in list(self.q1_target.parameters()) + list(self.q2_target.parameters()):
            p.requires_grad_(False)
        self.log_alpha = torch.tensor(math.log(cfg.init_alpha), requires_grad=True)
        self.target_entropy = float(-act_dim if cfg.target_entropy is None else cfg.target_entropy)
        self.pi_opt = torch.optim.Adam(self.policy.parameters(), lr=cfg.lr)
        self.q_opt = torch.optim.Adam(list(self.q1.parameters()) + list(self.q2.parameters()), lr=cfg.lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=cfg.lr)

    @property
    def alpha(self) -> float:
        return float(self.log_alpha.detach().exp())

    def critic_target(self, rew: torch.Tensor, next_obs: torch.Tensor, done: torch.Tensor, noise=None) -> torch.Tensor:
        """r + gamma * (1 - done) * soft value of the next state; exactly r when done."""
        with torch.no_grad():
            a2, logp2 = self.policy.sample(next_obs, noise)
            a2n = self.policy.squash.normalise(a2)
            q_next = torch.min(self.q1_target(next_obs, a2n), self.q2_target(next_obs, a2n)) - self.log_alpha.exp() * logp2
            not_done = 1.0 - done
            return rew + self.cfg.gamma * torch.where(not_done > 0, not_done * q_next, torch.zeros_like(q_next))

    def critic_loss(self, obs, act, target) -> torch.Tensor:
        an = self.policy.squash.normalise(act)
        return F.mse_loss(self.q1(obs, an), target) + F.mse_loss(self.q2(obs, an), target)

    def actor_loss(self, obs, noise=None) -> tuple[torch.Tensor, torch.Tensor]:
        a, logp = self.policy.sample(obs, noise)
        an = self.policy.squash.normalise(a)
        q = torch.min(self.q1(obs, an), self.q2(obs, an))
        return (self.log_alpha.exp().detach() * logp - q).mean(), logp

    def update(self, batch: Batch) -> dict[str, float]:
        obs = torch.from_numpy(batch.obs)
        act = torch.from_numpy(batch.act)
        rew = torch.from_numpy(batch.rew)
        next_obs = torch.from_numpy(batch.next_obs)
        done = torch.from_numpy(batch.done)

        target = self.critic_target(rew, next_obs, done)
        q_loss = self.critic_loss(obs, act, target)
        if not torch.isfinite(q_loss):
            raise TrainingDiverged(f"critic loss became non-finite ({q_loss.item()})")
        self.q_opt.zero_grad()
        q_loss.backward()
        self.q_opt.step()

        for p in list(self.q1.parameters()) + list(self.q2.parameters()):
            p.requires_grad_(False)
        pi_loss, logp = self.actor_loss(obs)
        self.pi_opt.zero_grad()
        pi_loss.backward()
        self.pi_opt.step()
        for p in list(self.q1.parameters()) + list(self.q2.parameters()):
            p.requires_grad_(True)

        alpha_loss = -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()

        _soft_update(self.q1_target, self.q1, self.cfg.tau)
        _soft_update(self.q2_target, self.q2, self.cfg.tau)
        return {"q_loss": q_loss.item(), "pi_loss": pi_loss.item(), "alpha": self.alpha}


@dataclass
class SACResult:
    ped_policy: GaussianPolicy
    veh_policy: GaussianPolicy
    curve: list[dict[str, float]]
    episodes: list[dict[str, float]] = field(default_factory=list)
    agents: tuple[SACAgent, SACAgent] | None = None

    def __iter__(self):
        return iter((self.ped_policy, self.veh_policy, self.curve))


def _uniform(spec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(spec.low, spec.high)


def sac_train(
    env_factory: Callable[[np.random.Generator], Any],
    variant: Any,
    config: SACConfig,
    rng: np.random.Generator,
    callback: Callable[[int, dict[str, float]], None] | None = None,
) -> SACResult:
    """Train pedestrian and vehicle policies together.

    ``env_factory(rng)`` must return a two-agent environment exposing
    ``reset()``, ``step(ped_action, veh_action)``, ``ped_spec``/``veh_spec``
    and ``ped_obs_dim``/``veh_obs_dim``; its ``reset`` is expected to
    resample the population spec for every episode. ``variant`` is recorded
    only. The returned curve has one row per iteration holding the running
    mean return of recently finished episodes per agent.
    """
    torch.manual_seed(int(rng.integers(2**31 - 1)))
    env = env_factory(rng)
    ped = SACAgent(env.ped_obs_dim, env.ped_spec.low, env.ped_spec.high, config)
    veh = SACAgent(env.veh_obs_dim, env.veh_spec.low, env.veh_spec.high, config)
    ped_buf = ReplayBuffer(env.ped_obs_dim, env.ped_spec.dim, config.buffer_capacity)
    veh_buf = ReplayBuffer(env.veh_obs_dim, env.veh_spec.dim, config.buffer_capacity)

    curve: list[dict[str, float]] = []
    episodes: list[dict[str, float]] = []
    if config.iterations == 0:
        return SACResult(ped.policy, veh.policy, curve, episodes, (ped, veh))

    o_p, o_v = env.reset()
    ret_p = ret_v = 0.0
    env_steps = 0
    losses: dict[str, float] = {}
    for it in range(config.iterations):
        for _ in range(config.env_steps_per_iteration):
            if env_steps < config.random_steps:
                a_p, a_v = _uniform(env.ped_spec, rng), _uniform(env.veh_spec, rng)
            else:
                a_p = policy_act(ped.policy, o_p, False, rng)
                a_v = policy_act(veh.policy, o_v, False, rng)
            res = env.step(a_p, a_v)
            env_steps += 1
            if res.ped_active:
                ped_buf.add(o_p, a_p, res.reward_ped, res.obs_ped, res.ped_terminal or res.done)
            if res.veh_active:
                veh_buf.add(o_v, a_v, res.reward_veh, res.obs_veh, res.veh_terminal or res.done)
            ret_p += res.reward_ped
            ret_v += res.reward_veh
            o_p, o_v = res.obs_ped, res.obs_veh
            if res.done:
                episodes.append({
                    "iteration": it,
                    "ped_return": ret_p,
                    "veh_return": ret_v,
                    "outcome": getattr(getattr(res.outcome, "kind", None), "value", str(res.outcome)),
                })
                o_p, o_v = env.reset()
                ret_p = ret_v = 0.0

        if len(ped_buf) >= config.update_after and len(veh_buf) >= config.update_after:
            lp = ped.update(ped_buf.sample(config.batch_size, rng))
            lv = veh.update(veh_buf.sample(config.batch_size, rng))
            losses = {f"ped_{k}": v for k, v in lp.items()} | {f"veh_{k}": v for k, v in lv.items()}

        recent = episodes[-config.curve_window:]
        row = {
            "iteration": it,
            "ped_reward": float(np.mean([e["ped_return"] for e in recent])) if recent else math.nan,
            "veh_reward": float(np.mean([e["veh_return"] for e in recent])) if recent else math.nan,
            "episodes": len(episodes),
            **losses,
        }
        curve.append(row)
        if callback is not None:
            callback(it, row)
    return SACResult(ped.policy, veh.policy, curve, episodes, (ped, veh))


def episode_returns(
    env, ped_policy, veh_policy, n_episodes: int, rng: np.random.Generator, deterministic: bool = True
) -> list[dict[str, Any]]:
    """Run full episodes; ``None`` policies act uniformly at random."""
    out = []
    for _ in range(n_episodes):
        o_p, o_v = env.reset()
        ret_p = ret_v = 0.0
        collided = False
        while True:
            a_p = _uniform(env.ped_spec, rng) if ped_policy is None else policy_act(ped_policy, o_p, deterministic, rng)
            a_v = _uniform(env.veh_spec, rng) if veh_policy is None else policy_act(veh_policy, o_v, deterministic, rng)
            res = env.step(a_p, a_v)
            ret_p += res.reward_ped
            ret_v += res.reward_veh
            collided = collided or bool(res.info.get("collision", False))
            o_p, o_v = res.obs_ped, res.obs_veh
            if res.done:
                break
        out.append({"ped_return": ret_p, "veh_return": ret_v, "collision": collided})
    return out


def summarise_returns(rows: Sequence[dict[str, Any]]) -> dict[str, float]:
    ped = np.array([r["ped_return"] for r in rows])
    veh = np.array([r["veh_return"] for r in rows])
    return {
        "ped_return": float(ped.mean()),
        "veh_return": float(veh.mean()),
        "joint_return": float((ped + veh).mean()),
        "collision_rate": float(np.mean([r["collision"] for r in rows])),
        "episodes": len(rows),
    }
