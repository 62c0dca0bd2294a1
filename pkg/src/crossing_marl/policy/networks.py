"""Actor and critic networks with bounded (squashed) action outputs."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
DEFAULT_HIDDEN = (256, 128, 64)


def mlp(in_dim: int, hidden: Sequence[int], out_dim: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    last = in_dim
    for width in hidden:
        layers += [nn.Linear(last, width), nn.ReLU()]
        last = width
    layers.append(nn.Linear(last, out_dim))
    return nn.Sequential(*layers)


class Squash(nn.Module):
    """tanh map from R^n onto the box [low, high]; 0 maps to the box midpoint."""

    def __init__(self, low, high):
        super().__init__()
        low = torch.as_tensor(np.asarray(low, dtype=np.float32))
        high = torch.as_tensor(np.asarray(high, dtype=np.float32))
        if torch.any(high <= low):
            raise ValueError("action bounds must satisfy low < high")
        self.register_buffer("mid", (high + low) / 2)
        self.register_buffer("half_range", (high - low) / 2)

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        return self.mid + self.half_range * torch.tanh(u)

    def log_abs_det(self, u: torch.Tensor) -> torch.Tensor:
        # log|d a / d u| summed over action dims; log(1 - tanh^2 u) written stably
        log_dtanh = 2.0 * (math.log(2.0) - u - F.softplus(-2.0 * u))
        return (torch.log(self.half_range) + log_dtanh).sum(-1)

    def normalise(self, a: torch.Tensor) -> torch.Tensor:
        """Map bounded actions to [-1, 1] (critic input scale)."""
        return (a - self.mid) / self.half_range


class GaussianPolicy(nn.Module):
    """Diagonal Gaussian in pre-squash space, squashed into the action box."""

    def __init__(self, obs_dim: int, low, high, hidden: Sequence[int] = DEFAULT_HIDDEN):
        super().__init__()
        self.obs_dim = int(obs_dim)
        self.act_dim = len(low)
        self.hidden = tuple(int(h) for h in hidden)
        self.trunk = mlp(obs_dim, hidden[:-1], hidden[-1]) if hidden else nn.Identity()
        feat = hidden[-1] if hidden else obs_dim
        self.mean_head = nn.Linear(feat, self.act_dim)
        self.log_std_head = nn.Linear(feat, self.act_dim)
        self.squash = Squash(low, high)

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = F.relu(self.trunk(obs)) if len(self.hidden) else obs
        mean = self.mean_head(h)
        log_std = self.log_std_head(h).clamp(LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def sample(self, obs: torch.Tensor, noise: torch.Tensor | None = None) -> tuple[torch.Tensor, torch.Tensor]:
        """Reparameterised squashed sample and its log-probability."""
        mean, log_std = self(obs)
        if noise is None:
            noise = torch.randn_like(mean)
        u = mean + log_std.exp() * noise
        logp = (-0.5 * noise**2 - log_std - 0.5 * math.log(2 * math.pi)).sum(-1) - self.squash.log_abs_det(u)
        return self.squash(u), logp

    def log_prob(self, action: torch.Tensor, obs: torch.Tensor) -> torch.Tensor:
        mean, log_std = self(obs)
        y = self.squash.normalise(action).clamp(-1 + 1e-6, 1 - 1e-6)
        u = torch.atanh(y)
        z = (u - mean) / log_std.exp()
        return (-0.5 * z**2 - log_std - 0.5 * math.log(2 * math.pi)).sum(-1) - self.squash.log_abs_det(u)

    @torch.no_grad()
    def act(self, obs, deterministic: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
        return policy_act(self, obs, deterministic, rng)


class DeterministicPolicy(nn.Module):
    """Plain regressor used by behavioural cloning; outputs are clipped to bounds when acting."""

    def __init__(self, obs_dim: int, low, high, hidden: Sequence[int] = (64, 64)):
        super().__init__()
        self.obs_dim = int(obs_dim)
        self.act_dim = len(low)
        self.hidden = tuple(int(h) for h in hidden)
        self.net = mlp(obs_dim, hidden, self.act_dim)
        self.register_buffer("low", torch.as_tensor(np.asarray(low, dtype=np.float32)))
        self.register_buffer("high", torch.as_tensor(np.asarray(high, dtype=np.float32)))

    def forward(self, obs: torch.Tensor) -> torch.Tensor:
        return self.net(obs)

    @torch.no_grad()
    def act(self, obs, deterministic: bool = True, rng: np.random.Generator | None = None) -> np.ndarray:
        return policy_act(self, obs, True, rng)


class QNetwork(nn.Module):
    def __init__(self, obs_dim: int, act_dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN):
        super().__init__()
        self.net = mlp(obs_dim + act_dim, hidden, 1)

    def forward(self, obs: torch.Tensor, act_unit: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([obs, act_unit], dim=-1)).squeeze(-1)


@torch.no_grad()
def policy_act(net: nn.Module, obs, deterministic: bool = False, rng: np.random.Generator | None = None) -> np.ndarray:
    """Bounded action(s) for one observation or a batch.

    Stochastic draws take their noise from ``rng`` so numpy seeding fixes
    them; deterministic mode returns the squashed mean.
    """
    obs = np.asarray(obs, dtype=np.float32)
    single = obs.ndim == 1
    batch = obs[None, :] if single else obs
    if batch.shape[-1] != net.obs_dim:
        raise ValueError(f"observation has {batch.shape[-1]} features, policy expects {net.obs_dim}")
    x = torch.from_numpy(batch)
    if isinstance(net, DeterministicPolicy):
        out = torch.maximum(torch.minimum(net(x), net.high), net.low)
    else:
        mean, log_std = net(x)
        if deterministic:
            out = net.squash(mean)
        else:
            if rng is None:
                raise ValueError("stochastic actions need an rng")
            noise = torch.from_numpy(rng.standard_normal(mean.shape).astype(np.float32))
            out = net.squash(mean + log_std.exp() * noise)
        # float32 rounding in tanh can overshoot the bound slightly; clamp to the box
        out = torch.maximum(torch.minimum(out, net.squash.mid + net.squash.half_range), net.squash.mid - net.squash.half_range)
    arr = out.numpy().astype(float)
    return arr[0] if single else arr
