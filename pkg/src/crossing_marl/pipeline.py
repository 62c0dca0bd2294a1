"""Corpus preparation, persistence and segment rollouts shared by the CLI stages."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .data import (
    InitialConditionModel,
    InteractionPair,
    RawTrack,
    TrajectorySegment,
    extract_pairs,
    fit_initial_kde,
    read_pairs,
    read_segments,
    segment_pairs,
    write_pairs,
    write_segments,
)
from .evaluation import KDEModel, compute_metrics, fit_metric_kdes, pool_metrics
from .params import PopulationSpec, sample_agent_params
from .policy.rollout import rollout
from .trajectory import Trajectory
from .world import DEFAULT_DT, SceneGeometry

PAIRS_FILE = "pairs.jsonl"
SEGMENTS_FILE = "segments.jsonl"
INIT_KDE_FILE = "init_kde.json"
METRIC_KDE_FILE = "metric_kdes.json"


@dataclass
class Corpus:
    pairs: list[InteractionPair]
    segments: list[TrajectorySegment]
    init_model: InitialConditionModel
    metric_kdes: dict[str, KDEModel]

    def segment_trajectories(self) -> list[Trajectory]:
        return [s.traj for s in self.segments]


def prepare_corpus(tracks: Sequence[RawTrack], geom: SceneGeometry | None = None, dt: float = DEFAULT_DT) -> Corpus:
    """Extract pairs, cut segments and fit both the start-state and metric KDEs."""
    pairs = extract_pairs(tracks, geom, dt)
    if len(pairs) < 2:
        raise ValueError(f"need at least two interaction pairs, extracted {len(pairs)}")
    segments = segment_pairs(pairs)
    metrics = pool_metrics([compute_metrics(s.traj, geom) for s in segments])
    return Corpus(pairs, segments, fit_initial_kde(pairs), fit_metric_kdes(metrics))


def save_corpus(corpus: Corpus, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_pairs(corpus.pairs, out / PAIRS_FILE)
    write_segments(corpus.segments, out / SEGMENTS_FILE)
    (out / INIT_KDE_FILE).write_text(json.dumps(corpus.init_model.to_dict(), sort_keys=True))
    (out / METRIC_KDE_FILE).write_text(json.dumps({k: m.to_dict() for k, m in corpus.metric_kdes.items()}, sort_keys=True))


def load_corpus(data_dir: str | Path) -> Corpus:
    d = Path(data_dir)
    missing = [f for f in (PAIRS_FILE, SEGMENTS_FILE, INIT_KDE_FILE, METRIC_KDE_FILE) if not (d / f).is_file()]
    if missing:
        raise FileNotFoundError(f"{d}: missing corpus files {missing}; run the extract stage first")
    kdes = json.loads((d / METRIC_KDE_FILE).read_text())
    return Corpus(
        read_pairs(d / PAIRS_FILE),
        read_segments(d / SEGMENTS_FILE),
        InitialConditionModel.from_dict(json.loads((d / INIT_KDE_FILE).read_text())),
        {k: KDEModel.from_dict(v) for k, v in kdes.items()},
    )


def rollout_segments(
    env_factory: Callable[[np.random.Generator], Any],
    ped_policy,
    veh_policy,
    segments: Sequence[TrajectorySegment],
    spec: PopulationSpec,
    reps: int,
    horizon: float,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> list[list[Trajectory]]:
    """``reps`` rollouts from each segment's recorded start.

    Agent parameters are drawn once per (pair, rep) and shared by that
    pair's segments, so one simulated individual covers a whole interaction.
    """
    env = env_factory(rng)
    pair_params: dict[str, list] = {}
    out = []
    for seg in segments:
        if seg.pair_id not in pair_params:
            pair_params[seg.pair_id] = [sample_agent_params(spec, rng) for _ in range(reps)]
        out.append(rollout(
            env, ped_policy, veh_policy, seg.initial_state(), horizon, reps, rng,
            population=spec, params=pair_params[seg.pair_id], deterministic=deterministic,
        ))
    return out


def segment_metric_samples(trajs_per_segment: Sequence[Sequence[Trajectory]], geom: SceneGeometry | None = None) -> list[dict]:
    """Pooled metric samples per segment (rollouts shorter than 3 samples are skipped)."""
    out = []
    for reps in trajs_per_segment:
        usable = [compute_metrics(tr, geom) for tr in reps if len(tr) >= 3]
        if usable:
            out.append(pool_metrics(usable))
    return out


def metric_kdes_to_json(kdes: Mapping[str, KDEModel]) -> str:
    return json.dumps({k: m.to_dict() for k, m in kdes.items()}, sort_keys=True)
