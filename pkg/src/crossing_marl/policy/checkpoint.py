"""Versioned policy checkpoints carrying the observation layout they expect."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..observe import layout_for
from ..variants import AgentKind, ModelVariant
from .networks import DeterministicPolicy, GaussianPolicy

CHECKPOINT_VERSION = 1


def save_policy(path: str | Path, policy, agent: AgentKind, variant: ModelVariant, meta: dict[str, Any] | None = None) -> None:
    variant = ModelVariant.parse(variant)
    layout = layout_for(AgentKind(agent), variant)
    if len(layout) != policy.obs_dim:
        raise ValueError(f"policy expects {policy.obs_dim} features but the {variant.value} layout has {len(layout)}")
    if isinstance(policy, GaussianPolicy):
        kind, low, high = "gaussian", policy.squash.mid - policy.squash.half_range, policy.squash.mid + policy.squash.half_range
    else:
        kind, low, high = "deterministic", policy.low, policy.high
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "kind": kind,
            "agent": AgentKind(agent).value,
            "layout": layout.schema(),
            "obs_dim": policy.obs_dim,
            "low": low.tolist(),
            "high": high.tolist(),
            "hidden": list(policy.hidden),
            "state_dict": policy.state_dict(),
            "meta": meta or {},
        },
        path,
    )


def load_policy(path: str | Path, expect_variant: ModelVariant | None = None):
    """Rebuild a policy; returns (policy, record without weights)."""
    rec = torch.load(path, map_location="cpu", weights_only=False)
    if rec.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {rec.get('version')!r}")
    variant = ModelVariant.parse(rec["layout"]["variant"])
    if expect_variant is not None and variant is not ModelVariant.parse(expect_variant):
        raise ValueError(f"{path}: checkpoint is for {variant.value}, expected {ModelVariant.parse(expect_variant).value}")
    layout = layout_for(AgentKind(rec["agent"]), variant)
    if layout.schema() != rec["layout"]:
        raise ValueError(f"{path}: stored observation layout differs from the current one")
    cls = GaussianPolicy if rec["kind"] == "gaussian" else DeterministicPolicy
    policy = cls(rec["obs_dim"], np.array(rec["low"]), np.array(rec["high"]), tuple(rec["hidden"]))
    policy.load_state_dict(rec["state_dict"])
    policy.eval()
    info = {k: v for k, v in rec.items() if k != "state_dict"}
    return policy, info
