"""Behavioural metrics, per-metric KDE likelihoods and trajectory error scores."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .trajectory import Trajectory
from .world import SceneGeometry, WorldState

log = logging.getLogger(__name__)

METRICS = (
    "ped_speed",
    "veh_speed",
    "ped_accel",
    "veh_accel",
    "ped_angular_velocity",
    "ped_angular_accel",
    "distance",
    "ped_x",
    "veh_x",
    "ped_y",
    "ped_heading",
    "pet",
)

LOG_DENSITY_FLOOR = -20.0
KDE_BANDWIDTH_FLOOR = 1e-3
PET_EPS_V = 0.1
MIN_METRIC_SAMPLES = 3


def projected_pet(state: WorldState, eps_v: float = PET_EPS_V, geom: SceneGeometry | None = None) -> float | None:
    """Predicted (vehicle passing time - pedestrian passing time), or None.

    Positive means the pedestrian reaches its line first. Undefined once
    either agent is past its line or the pedestrian walks away from it.
    """
    g = geom or SceneGeometry()
    ped_dist = g.crossing_y - state.ped_y
    veh_dist = g.crossing_x - state.veh_x
    if ped_dist < 0 or veh_dist < 0:
        return None
    ped_toward = state.ped_speed * math.cos(state.ped_heading)
    if ped_toward < 0 or state.veh_speed < 0:
        return None
    t_ped = ped_dist / max(ped_toward, eps_v)
    t_veh = veh_dist / max(state.veh_speed, eps_v)
    return t_veh - t_ped


def compute_metrics(traj: Trajectory, geom: SceneGeometry | None = None, eps_v: float = PET_EPS_V) -> dict[str, np.ndarray]:
    """Per-step metric samples; PET drops undefined steps."""
    n = len(traj)
    if n < MIN_METRIC_SAMPLES:
        raise ValueError(f"need at least {MIN_METRIC_SAMPLES} samples for metrics, got {n}")
    dt = traj.dt
    heading = np.unwrap(traj.ped_heading)
    ang_vel = np.gradient(heading, dt)
    pet = [projected_pet(traj.state_at(k), eps_v, geom) for k in range(n)]
    return {
        "ped_speed": traj.ped_speed.copy(),
        "veh_speed": traj.veh_speed.copy(),
        "ped_accel": np.gradient(traj.ped_speed, dt),
        "veh_accel": np.gradient(traj.veh_speed, dt),
        "ped_angular_velocity": ang_vel,
        "ped_angular_accel": np.gradient(ang_vel, dt),
        "distance": np.hypot(traj.ped_x - traj.veh_x, traj.ped_y - traj.veh_y),
        "ped_x": traj.ped_x.copy(),
        "veh_x": traj.veh_x.copy(),
        "ped_y": traj.ped_y.copy(),
        "ped_heading": traj.ped_heading.copy(),
        "pet": np.array([p for p in pet if p is not None], dtype=float),
    }


def pool_metrics(samples: Sequence[Mapping[str, np.ndarray]]) -> dict[str, np.ndarray]:
    keys = samples[0].keys() if samples else METRICS
    return {k: np.concatenate([np.asarray(s[k], dtype=float) for s in samples]) if samples else np.empty(0) for k in keys}


# -- KDE ---------------------------------------------------------------------


@dataclass(frozen=True)
class KDEModel:
    samples: np.ndarray
    bandwidth: float
    floor: float = LOG_DENSITY_FLOOR

    def log_density(self, x) -> np.ndarray:
        return kde_log_density(self, x)

    def to_dict(self) -> dict[str, Any]:
        return {"samples": self.samples.tolist(), "bandwidth": self.bandwidth, "floor": self.floor}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "KDEModel":
        return cls(np.asarray(d["samples"], dtype=float), float(d["bandwidth"]), float(d.get("floor", LOG_DENSITY_FLOOR)))


def scott_bandwidth(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size < 2:
        return KDE_BANDWIDTH_FLOOR
    return max(float(np.std(samples, ddof=1)) * samples.size ** (-0.2), KDE_BANDWIDTH_FLOOR)


def fit_metric_kde(samples, floor: float = LOG_DENSITY_FLOOR) -> KDEModel:
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.size == 0:
        raise ValueError("cannot fit a KDE to an empty sample set")
    if not np.all(np.isfinite(samples)):
        raise ValueError("KDE samples must be finite")
    return KDEModel(samples, scott_bandwidth(samples), floor)


def kde_log_density(model: KDEModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    z = (x[:, None] - model.samples[None, :]) / model.bandwidth
    logp = logsumexp(-0.5 * z * z, axis=1) - math.log(model.samples.size * model.bandwidth * math.sqrt(2 * math.pi))
    return np.maximum(logp, model.floor)


def fit_metric_kdes(real: Mapping[str, np.ndarray]) -> dict[str, KDEModel]:
    return {k: fit_metric_kde(v) for k, v in real.items() if np.asarray(v).size > 0}


# -- scores ------------------------------------------------------------------


@dataclass
class CompositeNLL:
    value: float
    per_metric: dict[str, float]
    skipped: list[str] = field(default_factory=list)


def composite_nll(
    model_samples: Mapping[str, np.ndarray] | Sequence[Mapping[str, np.ndarray]],
    real_kdes: Mapping[str, KDEModel],
) -> CompositeNLL:
    """Unweighted mean NLL: over samples per (metric, segment), then segments, then metrics.

    A single mapping counts as one segment. Metrics with no model samples in
    any segment are left out and listed in ``skipped``.
    """
    segments = [model_samples] if isinstance(model_samples, Mapping) else list(model_samples)
    per_metric: dict[str, float] = {}
    skipped = []
    for name in sorted(real_kdes):
        seg_nll = []
        for seg in segments:
            x = np.asarray(seg.get(name, ()), dtype=float)
            if x.size:
                seg_nll.append(-float(np.mean(kde_log_density(real_kdes[name], x))))
        if seg_nll:
            per_metric[name] = float(np.mean(seg_nll))
        else:
            skipped.append(name)
            log.warning("metric %s has no model samples; excluded from the composite", name)
    if not per_metric:
        raise ValueError("no metric has model samples")
    return CompositeNLL(float(np.mean(list(per_metric.values()))), per_metric, skipped)


def ks_statistic(a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs two non-empty samples")
    return float(stats.ks_2samp(a, b).statistic)


def _positions(traj) -> np.ndarray:
    if isinstance(traj, Trajectory):
        return traj.positions()
    arr = np.asarray(traj, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    return arr


def ade_fde(model_traj, real_traj) -> tuple[float, float]:
    """Mean and final-step Euclidean error, averaged over agents.

    Accepts ``Trajectory`` objects or position arrays of shape (T, 2) or
    (T, agents, 2).
    """
    a, b = _positions(model_traj), _positions(real_traj)
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    if a.shape[0] == 0:
        raise ValueError("empty trajectories")
    err = np.linalg.norm(a - b, axis=-1)
    return float(err.mean()), float(err[-1].mean())


# -- reports -----------------------------------------------------------------


def evaluate_segments(
    model_trajs: Sequence[Sequence[Trajectory]],
    real_segments: Sequence[Trajectory],
    real_kdes: Mapping[str, KDEModel] | None = None,
    geom: SceneGeometry | None = None,
) -> dict[str, Any]:
    """Score model rollouts (one list of reps per segment) against real segments."""
    if len(model_trajs) != len(real_segments):
        raise ValueError("one list of model rollouts per real segment is required")
    real_metrics = [compute_metrics(tr, geom) for tr in real_segments]
    real_pool = pool_metrics(real_metrics)
    kdes = dict(real_kdes) if real_kdes is not None else fit_metric_kdes(real_pool)
    per_segment = []
    model_by_segment = []
    for reps, real in zip(model_trajs, real_segments):
        usable = [tr for tr in reps if len(tr) >= MIN_METRIC_SAMPLES]
        seg = pool_metrics([compute_metrics(tr, geom) for tr in usable]) if usable else {}
        model_by_segment.append(seg)
        errs = []
        for tr in reps:
            n = min(len(tr), len(real))
            if n:
                errs.append(ade_fde(tr.positions()[:n], real.positions()[:n]))
        ade = float(np.mean([e[0] for e in errs])) if errs else math.nan
        fde = float(np.mean([e[1] for e in errs])) if errs else math.nan
        per_segment.append({"ade": ade, "fde": fde})
    model_pool = pool_metrics([m for m in model_by_segment if m])
    comp = composite_nll([m for m in model_by_segment if m], kdes)
    ks = {}
    for name in METRICS:
        a, b = model_pool.get(name, np.empty(0)), real_pool.get(name, np.empty(0))
        ks[name] = ks_statistic(a, b) if a.size and b.size else math.nan
    return {
        "composite_nll": comp.value,
        "per_metric_nll": comp.per_metric,
        "skipped_metrics": comp.skipped,
        "ks": ks,
        "per_segment": per_segment,
        "ade": float(np.nanmean([s["ade"] for s in per_segment])),
        "fde": float(np.nanmean([s["fde"] for s in per_segment])),
    }


def histogram_rows(samples: Mapping[str, np.ndarray], source: str, bins: int = 30) -> list[dict[str, Any]]:
    """Long-format density histogram rows for distribution plots."""
    rows = []
    for name, x in samples.items():
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            continue
        dens, edges = np.histogram(x, bins=bins, density=True)
        for lo, hi, d in zip(edges[:-1], edges[1:], dens):
            rows.append({"source": source, "metric": name, "bin_lo": float(lo), "bin_hi": float(hi), "density": float(d)})
    return rows


def speed_distance_rows(traj: Trajectory, source: str, label: str = "") -> list[dict[str, Any]]:
    """Agent speeds against distance to the crossing point."""
    g = SceneGeometry()
    rows = []
    for k in range(len(traj)):
        rows.append({
            "source": source,
            "label": label,
            "t": float(traj.t[k]),
            "ped_dist": float(g.crossing_y - traj.ped_y[k]),
            "ped_speed": float(traj.ped_speed[k]),
            "veh_dist": float(g.crossing_x - traj.veh_x[k]),
            "veh_speed": float(traj.veh_speed[k]),
        })
    return rows
