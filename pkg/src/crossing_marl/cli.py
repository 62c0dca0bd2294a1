"""Command-line entry point: synthetic data, extraction, training, fitting, evaluation, rollouts, plot data.

Every subcommand validates its inputs before writing anything. Failures
exit nonzero and print one JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import torch

from .config import ConfigError, RunConfig, config_from_mapping, load_config
from .data import generate_synthetic_corpus, read_tracks_csv, write_tracks_csv
from .evaluation import compute_metrics, evaluate_segments, histogram_rows, pool_metrics, speed_distance_rows
from .fit import FitResult, RolloutObjective, fit_phi, quadratic_stub
from .params import PHI_BOUNDS, PopulationSpec
from .pipeline import Corpus, load_corpus, prepare_corpus, rollout_segments, save_corpus
from .policy.bc import bc_demonstrations, bc_train
from .policy.checkpoint import load_policy, save_policy
from .policy.rollout import trajectories_to_rows
from .policy.sac import sac_train
from .scenes import compact_env_factory, corpus_env_factory
from .variants import AgentKind, ModelVariant

log = logging.getLogger("crossing_marl")

TRACKS_FILE = "tracks.csv"
PED_CKPT = "ped.pt"
VEH_CKPT = "veh.pt"
FIT_FILE = "fit.json"


class CommandError(RuntimeError):
    """A subcommand could not run with the given inputs."""


# -- helpers -----------------------------------------------------------------


def _write_csv(rows: Sequence[Mapping[str, Any]], path: Path) -> None:
    fields: list[str] = []
    for row in rows:
        fields += [k for k in row if k not in fields]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _write_json(obj: Any, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable))


def _jsonable(x: Any) -> Any:
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _require_dir(path: str | None, what: str) -> Path:
    if path is None:
        raise CommandError(f"--{what} is required")
    p = Path(path)
    if not p.is_dir():
        raise CommandError(f"{what} directory not found: {p}")
    return p


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _env_factory(cfg: RunConfig, corpus: Corpus | None):
    if cfg.scene == "compact":
        return compact_env_factory(cfg.variant)
    if corpus is None:
        raise CommandError("the corpus scene needs --data pointing at extracted data")
    return corpus_env_factory(cfg.variant, corpus.init_model, cfg.geometry, cfg.dt)


def _load_policies(policy_dir: Path, variant: ModelVariant):
    for name in (PED_CKPT, VEH_CKPT):
        if not (policy_dir / name).is_file():
            raise CommandError(f"{policy_dir}: missing checkpoint {name}")
    ped, _ = load_policy(policy_dir / PED_CKPT, expect_variant=variant)
    veh, _ = load_policy(policy_dir / VEH_CKPT, expect_variant=variant)
    return ped, veh


def _spec_from(args) -> PopulationSpec:
    if getattr(args, "phi", None):
        path = Path(args.phi)
        if not path.is_file():
            raise CommandError(f"fit report not found: {path}")
        return PopulationSpec.from_phi(FitResult.load(path).phi_best)
    return PopulationSpec.midpoint()


def _segments_for(corpus: Corpus, pair_id: str | None):
    if pair_id is None:
        return corpus.segments
    segs = [s for s in corpus.segments if s.pair_id == pair_id]
    if not segs:
        raise CommandError(f"unknown pair id {pair_id!r}")
    return segs


# -- commands ----------------------------------------------------------------


def cmd_synth_data(args, cfg: RunConfig) -> dict[str, Any]:
    n = args.n_pairs if args.n_pairs is not None else cfg.synth.n_pairs
    mix = tuple(args.mix) if args.mix is not None else cfg.synth.mix
    if n < 1:
        raise ConfigError("--n-pairs must be positive")
    out = _out_dir(args)
    tracks = generate_synthetic_corpus(n, mix, np.random.default_rng(cfg.seed), cfg.geometry, cfg.dt)
    write_tracks_csv(tracks, out / TRACKS_FILE)
    counts: dict[str, int] = {}
    for tr in tracks:
        if tr.kind == "pedestrian":
            counts[tr.scenario] = counts.get(tr.scenario, 0) + 1
    return {"tracks": str(out / TRACKS_FILE), "n_pairs": n, "scenarios": counts}


def cmd_extract(args, cfg: RunConfig) -> dict[str, Any]:
    src = Path(args.tracks)
    if not src.is_file():
        raise CommandError(f"tracks file not found: {src}")
    tracks = read_tracks_csv(src, cfg.dt)
    corpus = prepare_corpus(tracks, cfg.geometry, cfg.dt)
    out = _out_dir(args)
    save_corpus(corpus, out)
    return {"pairs": len(corpus.pairs), "segments": len(corpus.segments), "out": str(out)}


def cmd_train(args, cfg: RunConfig) -> dict[str, Any]:
    corpus = load_corpus(_require_dir(args.data, "data")) if args.data else None
    if args.algo == "bc" and corpus is None:
        raise CommandError("behavioural cloning needs --data")
    factory = _env_factory(cfg, corpus) if args.algo == "sac" else None
    out = _out_dir(args)
    rng = np.random.default_rng(cfg.seed)
    start = time.perf_counter()
    if args.algo == "sac":
        res = sac_train(factory, cfg.variant, cfg.sac, rng)
        ped, veh, curve = res
        variant = cfg.variant
    else:
        demos = bc_demonstrations(corpus.pairs)
        ped, veh, losses = bc_train(demos, cfg.bc, rng)
        n = max(len(losses["pedestrian"]), len(losses["vehicle"]))
        curve = [
            {
                "epoch": i,
                "ped_loss": losses["pedestrian"][i] if i < len(losses["pedestrian"]) else None,
                "veh_loss": losses["vehicle"][i] if i < len(losses["vehicle"]) else None,
            }
            for i in range(n)
        ]
        # cloned policies read the unconstrained observation layout
        variant = ModelVariant.NC
    meta = {"algo": args.algo, "seed": cfg.seed, "config": cfg.to_dict()}
    save_policy(out / PED_CKPT, ped, AgentKind.PEDESTRIAN, variant, meta)
    save_policy(out / VEH_CKPT, veh, AgentKind.VEHICLE, variant, meta)
    _write_csv(curve, out / ("rewards.csv" if args.algo == "sac" else "bc_loss.csv"))
    return {"algo": args.algo, "variant": variant.value, "rows": len(curve), "seconds": time.perf_counter() - start}


def cmd_fit(args, cfg: RunConfig) -> dict[str, Any]:
    if args.stub:
        minimiser = PHI_BOUNDS[:, 0] + np.asarray(args.stub_minimiser or [0.3] * len(PHI_BOUNDS)) * (PHI_BOUNDS[:, 1] - PHI_BOUNDS[:, 0])
        objective = quadratic_stub(minimiser)
    else:
        corpus = load_corpus(_require_dir(args.data, "data"))
        ped, veh = _load_policies(_require_dir(args.policies, "policies"), cfg.variant)
        objective = RolloutObjective(
            _env_factory(cfg, corpus), ped, veh, corpus.segments, corpus.metric_kdes,
            cfg.fit.reps, cfg.fit.horizon, cfg.seed,
        )
    out = _out_dir(args)
    result = fit_phi(objective, cfg.fit, np.random.default_rng(cfg.seed))
    result.extra["variant"] = cfg.variant.value
    result.save(out / FIT_FILE)
    return {"best_value": result.best_value, "phi_best": result.phi_best.tolist(), "evaluations": len(result.history)}


def cmd_eval(args, cfg: RunConfig) -> dict[str, Any]:
    corpus = load_corpus(_require_dir(args.data, "data"))
    real = corpus.segment_trajectories()
    if args.self_check:
        model = [[tr] for tr in real]
    else:
        ped, veh = _load_policies(_require_dir(args.policies, "policies"), cfg.variant)
        spec = _spec_from(args)
        model = rollout_segments(
            _env_factory(cfg, corpus), ped, veh, corpus.segments, spec, cfg.eval.reps, cfg.eval.horizon,
            np.random.default_rng(cfg.seed), cfg.eval.deterministic,
        )
    out = _out_dir(args)
    report = evaluate_segments(model, real, corpus.metric_kdes, cfg.geometry)
    records = [{"kind": "composite", "nll": report["composite_nll"], "ade": report["ade"], "fde": report["fde"]}]
    records += [
        {"kind": "metric", "metric": name, "nll": report["per_metric_nll"].get(name), "ks": report["ks"][name]}
        for name in report["ks"]
    ]
    records += [
        {"kind": "segment", "segment_id": seg.segment_id, "pair_id": seg.pair_id, **row}
        for seg, row in zip(corpus.segments, report["per_segment"])
    ]
    records += [
        {"kind": "interaction", "pair_id": pid, "ade": float(np.mean(v["ade"])), "fde": float(np.mean(v["fde"]))}
        for pid, v in _per_pair(corpus, report["per_segment"]).items()
    ]
    with open(out / "eval.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _write_plot_data(out, corpus, model, cfg)
    return {"composite_nll": report["composite_nll"], "ade": report["ade"], "fde": report["fde"]}


def _per_pair(corpus: Corpus, per_segment: Iterable[Mapping[str, float]]) -> dict[str, dict[str, list[float]]]:
    grouped: dict[str, dict[str, list[float]]] = {}
    for seg, row in zip(corpus.segments, per_segment):
        g = grouped.setdefault(seg.pair_id, {"ade": [], "fde": []})
        g["ade"].append(row["ade"])
        g["fde"].append(row["fde"])
    return grouped


def _write_plot_data(out: Path, corpus: Corpus, model, cfg: RunConfig) -> None:
    real = corpus.segment_trajectories()
    real_metrics = pool_metrics([compute_metrics(tr, cfg.geometry) for tr in real])
    rows = histogram_rows(real_metrics, "real", cfg.eval.bins)
    if model is not None:
        flat = [tr for reps in model for tr in reps if len(tr) >= 3]
        if flat:
            rows += histogram_rows(pool_metrics([compute_metrics(tr, cfg.geometry) for tr in flat]), "model", cfg.eval.bins)
    _write_csv(rows, out / "metric_histograms.csv")

    profile = []
    for pair in corpus.pairs:
        profile += speed_distance_rows(pair.traj, "real", pair.pair_id)
    if model is not None:
        for seg, reps in zip(corpus.segments, model):
            for rep, tr in enumerate(reps):
                profile += speed_distance_rows(tr, "model", f"{seg.segment_id}/{rep}")
    _write_csv(profile, out / "speed_distance.csv")

    gaze = []
    if model is not None:
        eps = [tr.extras["gaze_eps_deg"][1:] for reps in model for tr in reps if "gaze_eps_deg" in tr.extras]
        eps = np.concatenate(eps) if eps else np.empty(0)
        eps = eps[np.isfinite(eps)]
        if eps.size:
            gaze = histogram_rows({"gaze_eccentricity_deg": eps}, "model", cfg.eval.bins)
    _write_csv(gaze or [{"source": "model", "metric": "gaze_eccentricity_deg"}], out / "gaze_histogram.csv")


def cmd_rollout(args, cfg: RunConfig) -> dict[str, Any]:
    corpus = load_corpus(_require_dir(args.data, "data"))
    segments = _segments_for(corpus, args.pair_id)
    if args.segment is not None:
        segments = [s for s in segments if s.index == args.segment]
        if not segments:
            raise CommandError(f"no segment {args.segment} for the selected pair")
    ped, veh = _load_policies(_require_dir(args.policies, "policies"), cfg.variant)
    reps = args.reps if args.reps is not None else cfg.eval.reps
    if reps < 1:
        raise ConfigError("--reps must be positive")
    horizon = args.horizon if args.horizon is not None else cfg.eval.horizon
    out = _out_dir(args)
    trajs = rollout_segments(
        _env_factory(cfg, corpus), ped, veh, segments, _spec_from(args), reps, horizon,
        np.random.default_rng(cfg.seed), cfg.eval.deterministic,
    )
    rows = []
    for seg, reps_trajs in zip(segments, trajs):
        rows += [{"segment_id": seg.segment_id, **r} for r in trajectories_to_rows(reps_trajs, "model")]
    _write_csv(rows, out / "rollouts.csv")
    return {"segments": len(segments), "trajectories": sum(len(t) for t in trajs), "rows": len(rows)}


def cmd_plot_data(args, cfg: RunConfig) -> dict[str, Any]:
    corpus = load_corpus(_require_dir(args.data, "data"))
    model = None
    if args.policies:
        ped, veh = _load_policies(_require_dir(args.policies, "policies"), cfg.variant)
        model = rollout_segments(
            _env_factory(cfg, corpus), ped, veh, corpus.segments, _spec_from(args), cfg.eval.reps,
            cfg.eval.horizon, np.random.default_rng(cfg.seed), cfg.eval.deterministic,
        )
    out = _out_dir(args)
    _write_plot_data(out, corpus, model, cfg)
    return {"files": ["metric_histograms.csv", "speed_distance.csv", "gaze_histogram.csv"]}


COMMANDS = {
    "synth-data": cmd_synth_data,
    "extract": cmd_extract,
    "train": cmd_train,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "rollout": cmd_rollout,
    "plot-data": cmd_plot_data,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--variant", help="NC, MC, VC or VMC (overrides the config)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="crossing-marl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-data", parents=[common], help="write a scripted synthetic track corpus")
    p.add_argument("--n-pairs", type=int)
    p.add_argument("--mix", type=float, nargs=3, metavar=("VEH_FIRST", "YIELD", "NO_YIELD"))

    p = sub.add_parser("extract", parents=[common], help="pair, segment and fit KDEs from a track CSV")
    p.add_argument("--tracks", required=True)

    p = sub.add_parser("train", parents=[common], help="train a policy pair (SAC, or BC from data)")
    p.add_argument("--data")
    p.add_argument("--algo", choices=("sac", "bc"), default="sac")

    p = sub.add_parser("fit", parents=[common], help="fit the population spec by Bayesian optimisation")
    p.add_argument("--data")
    p.add_argument("--policies")
    p.add_argument("--stub", action="store_true", help="optimise a quadratic bowl instead of rollouts")
    p.add_argument("--stub-minimiser", type=float, nargs=8, metavar="U", help="bowl minimum in unit-box coordinates")

    p = sub.add_parser("eval", parents=[common], help="score policy rollouts against the corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--policies")
    p.add_argument("--phi", help="fit report whose best spec is used (default: mid-range spec)")
    p.add_argument("--self-check", action="store_true", help="score the recorded segments against themselves")

    p = sub.add_parser("rollout", parents=[common], help="roll policies out from recorded segment starts")
    p.add_argument("--data", required=True)
    p.add_argument("--policies", required=True)
    p.add_argument("--pair-id")
    p.add_argument("--segment", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--phi")

    p = sub.add_parser("plot-data", parents=[common], help="emit histogram, speed-profile and gaze CSVs")
    p.add_argument("--data", required=True)
    p.add_argument("--policies")
    p.add_argument("--phi")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config)
    data = cfg.to_dict()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.variant is not None:
        data["variant"] = args.variant
    return config_from_mapping(data)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        torch.manual_seed(cfg.seed)
        summary = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _error(args.command, "ConfigError", str(exc))
        return 2
    except (CommandError, FileNotFoundError, ValueError, RuntimeError) as exc:
        _error(args.command, type(exc).__name__, str(exc))
        return 1
    print(json.dumps({"command": args.command, "status": "ok", **summary}, sort_keys=True, default=_jsonable))
    return 0


def _error(command: str, kind: str, message: str) -> None:
    print(json.dumps({"command": command, "status": "error", "error": kind, "message": message}), file=sys.stderr)


if __name__ == "__main__":
    raise SystemExit(main())
