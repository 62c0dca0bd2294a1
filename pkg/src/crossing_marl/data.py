"""Trajectory ingestion, one-to-one interaction extraction and segmenting.

Raw tracks are CSV rows ``track_id,kind,direction,t,x,y`` (an optional
``scenario`` column carries ground-truth labels for synthetic data). Tracks
are resampled onto a uniform grid, pedestrian/vehicle pairs are matched by
zone gating and temporal overlap, kept only when the match is one-to-one,
aligned, and cut to a fixed window which is then split into segments.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .trajectory import Trajectory
from .world import DEFAULT_DT, INIT_FIELDS, SceneGeometry, WorldState

PEDESTRIAN = "pedestrian"
VEHICLE = "vehicle"
PED_DIRECTION = "east"
PED_OPPOSITE_DIRECTION = "west"
VEH_DIRECTION = "north"

PAIR_WINDOW = 6.0
SEGMENT_LENGTH = 2.0
N_SEGMENTS = 3

SCENARIOS = ("vehicle_first", "ped_first_yield", "ped_first_no_yield")


@dataclass
class RawTrack:
    track_id: str
    kind: str
    direction: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    scenario: str = ""

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if not (self.t.shape == self.x.shape == self.y.shape):
            raise ValueError(f"track {self.track_id}: t, x, y lengths differ")
        if self.t.size and np.any(np.diff(self.t) <= 0):
            raise ValueError(f"track {self.track_id}: timestamps must be strictly increasing")
        if self.kind not in (PEDESTRIAN, VEHICLE):
            raise ValueError(f"track {self.track_id}: unknown kind {self.kind!r}")


def grid_index(t: np.ndarray | float, dt: float) -> np.ndarray:
    return np.rint(np.asarray(t) / dt).astype(np.int64)


def resample_track(track: RawTrack, dt: float = DEFAULT_DT) -> RawTrack:
    """Linear interpolation onto the ``k * dt`` grid covered by the track."""
    if track.t.size == 0:
        return track
    k0 = math.ceil(track.t[0] / dt - 1e-9)
    k1 = math.floor(track.t[-1] / dt + 1e-9)
    if k1 < k0:
        return RawTrack(track.track_id, track.kind, track.direction, [], [], [], track.scenario)
    k = np.arange(k0, k1 + 1)
    tg = k * dt
    return RawTrack(
        track.track_id,
        track.kind,
        track.direction,
        tg,
        np.interp(tg, track.t, track.x),
        np.interp(tg, track.t, track.y),
        track.scenario,
    )


def read_tracks_csv(path: str | Path, dt: float = DEFAULT_DT) -> list[RawTrack]:
    rows: dict[str, list[dict[str, str]]] = defaultdict(list)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"track_id", "kind", "direction", "t", "x", "y"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing CSV columns {sorted(missing)}")
        for row in reader:
            rows[row["track_id"]].append(row)
    tracks = []
    for track_id, items in rows.items():
        items.sort(key=lambda r: float(r["t"]))
        first = items[0]
        track = RawTrack(
            track_id,
            first["kind"],
            first["direction"],
            [float(r["t"]) for r in items],
            [float(r["x"]) for r in items],
            [float(r["y"]) for r in items],
            first.get("scenario", "") or "",
        )
        tracks.append(resample_track(track, dt))
    tracks.sort(key=lambda tr: tr.track_id)
    return tracks


def write_tracks_csv(tracks: Sequence[RawTrack], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "kind", "direction", "t", "x", "y", "scenario"])
        for tr in tracks:
            for t, x, y in zip(tr.t, tr.x, tr.y):
                writer.writerow([tr.track_id, tr.kind, tr.direction, f"{t:.6f}", f"{x:.6f}", f"{y:.6f}", tr.scenario])


# -- derived kinematics ------------------------------------------------------


def derive_speed(x: np.ndarray, y: np.ndarray, dt: float) -> np.ndarray:
    if x.size < 2:
        return np.zeros_like(x)
    return np.hypot(np.gradient(x, dt), np.gradient(y, dt))


def derive_heading(x: np.ndarray, y: np.ndarray, dt: float) -> np.ndarray:
    """Walking yaw from +y (clockwise positive), smoothed over 3 samples."""
    if x.size < 2:
        return np.zeros_like(x)
    raw = np.unwrap(np.arctan2(np.gradient(x, dt), np.gradient(y, dt)))
    if raw.size >= 3:
        padded = np.concatenate([raw[:1], raw, raw[-1:]])
        raw = (padded[:-2] + padded[1:-1] + padded[2:]) / 3.0
    return (raw + math.pi) % (2 * math.pi) - math.pi


# -- pairs and segments ------------------------------------------------------


@dataclass
class InteractionPair:
    pair_id: str
    ped_id: str
    veh_id: str
    t_start: float
    traj: Trajectory
    scenario: str = ""

    def initial_state(self) -> WorldState:
        return self.traj.state_at(0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "ped_id": self.ped_id,
            "veh_id": self.veh_id,
            "t_start": self.t_start,
            "scenario": self.scenario,
            "traj": self.traj.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InteractionPair":
        return cls(
            data["pair_id"], data["ped_id"], data["veh_id"], float(data["t_start"]),
            Trajectory.from_dict(data["traj"]), data.get("scenario", ""),
        )


@dataclass
class TrajectorySegment:
    pair_id: str
    index: int
    traj: Trajectory
    scenario: str = ""

    @property
    def segment_id(self) -> str:
        return f"{self.pair_id}#{self.index}"

    def initial_state(self) -> WorldState:
        return self.traj.state_at(0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "index": self.index,
            "scenario": self.scenario,
            "initial_state": self.initial_state().as_dict(),
            "traj": self.traj.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "TrajectorySegment":
        return cls(data["pair_id"], int(data["index"]), Trajectory.from_dict(data["traj"]), data.get("scenario", ""))


def _zone_interval(track: RawTrack, mask: np.ndarray) -> tuple[int, int] | None:
    """Indices of the first and last in-zone samples."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    return int(idx[0]), int(idx[-1])


def _veh_gate_mask(tr: RawTrack, g: SceneGeometry) -> np.ndarray:
    ahead = g.crossing_x - tr.x
    return (ahead >= 0.0) & (ahead <= g.veh_upstream)


def _ped_gate_mask(tr: RawTrack, g: SceneGeometry) -> np.ndarray:
    return (np.abs(tr.x - g.crossing_x) <= g.ped_gate_x) & (np.abs(tr.y - g.kerb_y) <= g.ped_gate_y)


def _refuge_mask(tr: RawTrack, g: SceneGeometry) -> np.ndarray:
    return (tr.y > g.ped_goal_y) & (tr.y <= g.ped_goal_y + g.refuge_y_extent)


def _times(tr: RawTrack, interval: tuple[int, int]) -> tuple[float, float]:
    return float(tr.t[interval[0]]), float(tr.t[interval[1]])


def _overlaps(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])


def extract_pairs(
    tracks: Sequence[RawTrack],
    geom: SceneGeometry | None = None,
    dt: float = DEFAULT_DT,
    window: float = PAIR_WINDOW,
) -> list[InteractionPair]:
    """One-to-one pedestrian/vehicle interaction pairs, aligned and cut to ``window`` seconds.

    Steps: direction filters and removal of vehicles that overlap an
    opposite-direction pedestrian on the refuge island, zone gating,
    temporal-overlap matching, one-to-one filtering both ways, pedestrian
    truncation to the near-crossing zone, alignment on the later entry, and
    the fixed window. Output order is by pedestrian id.
    """
    g = geom or SceneGeometry()
    tracks = [resample_track(tr, dt) if not _on_grid(tr, dt) else tr for tr in tracks]
    tracks = [tr for tr in tracks if tr.t.size >= 2]
    peds = sorted((tr for tr in tracks if tr.kind == PEDESTRIAN and tr.direction == PED_DIRECTION), key=lambda tr: tr.track_id)
    vehs = sorted((tr for tr in tracks if tr.kind == VEHICLE and tr.direction == VEH_DIRECTION), key=lambda tr: tr.track_id)
    opposite = [tr for tr in tracks if tr.kind == PEDESTRIAN and tr.direction == PED_OPPOSITE_DIRECTION]

    veh_gate: dict[str, tuple[float, float]] = {}
    for veh in vehs:
        iv = _zone_interval(veh, _veh_gate_mask(veh, g))
        if iv is None:
            continue
        span = _times(veh, iv)
        blocked = False
        for ped in opposite:
            ref = _zone_interval(ped, _refuge_mask(ped, g))
            if ref is not None and _overlaps(span, _times(ped, ref)):
                blocked = True
                break
        if not blocked:
            veh_gate[veh.track_id] = span

    candidates: dict[str, list[str]] = {}
    for ped in peds:
        iv = _zone_interval(ped, _ped_gate_mask(ped, g))
        if iv is None:
            continue
        span = _times(ped, iv)
        candidates[ped.track_id] = [vid for vid, vspan in veh_gate.items() if _overlaps(span, vspan)]

    matched = {pid: c[0] for pid, c in candidates.items() if len(c) == 1}
    per_vehicle: dict[str, int] = defaultdict(int)
    for vid in matched.values():
        per_vehicle[vid] += 1
    matched = {pid: vid for pid, vid in matched.items() if per_vehicle[vid] == 1}

    by_id = {tr.track_id: tr for tr in peds + vehs}
    n_window = int(round(window / dt))
    pairs = []
    for pid in sorted(matched):
        ped, veh = by_id[pid], by_id[matched[pid]]
        ped_iv = _zone_interval(ped, np.abs(ped.x - g.crossing_x) <= g.ped_trunc_x)
        ahead = g.crossing_x - veh.x
        veh_iv = _zone_interval(veh, (ahead <= g.veh_upstream) & (-ahead <= g.veh_downstream))
        if ped_iv is None or veh_iv is None:
            continue
        k_ped = grid_index(ped.t, dt)
        k_veh = grid_index(veh.t, dt)
        k_start = max(k_ped[ped_iv[0]], k_veh[veh_iv[0]])
        k_end = min(k_ped[ped_iv[1]], k_veh[veh_iv[1]])
        if k_end - k_start < n_window:
            continue
        pairs.append(_build_pair(ped, veh, k_ped, k_veh, int(k_start), n_window, dt))
    return pairs


def _on_grid(tr: RawTrack, dt: float) -> bool:
    if tr.t.size == 0:
        return True
    k = tr.t / dt
    return bool(np.all(np.abs(k - np.rint(k)) < 1e-6) and np.all(np.diff(np.rint(k)) == 1))


def _build_pair(
    ped: RawTrack, veh: RawTrack, k_ped: np.ndarray, k_veh: np.ndarray, k_start: int, n: int, dt: float
) -> InteractionPair:
    ped_speed = derive_speed(ped.x, ped.y, dt)
    ped_heading = derive_heading(ped.x, ped.y, dt)
    veh_speed = derive_speed(veh.x, veh.y, dt)
    veh_accel = np.gradient(veh_speed, dt) if veh_speed.size >= 2 else np.zeros_like(veh_speed)
    ip = int(np.searchsorted(k_ped, k_start))
    iv = int(np.searchsorted(k_veh, k_start))
    sp = slice(ip, ip + n)
    sv = slice(iv, iv + n)
    traj = Trajectory(
        t=np.arange(n) * dt,
        ped_x=ped.x[sp], ped_y=ped.y[sp], ped_speed=ped_speed[sp], ped_heading=ped_heading[sp],
        gaze_offset=np.zeros(n),
        veh_x=veh.x[sv], veh_y=veh.y[sv], veh_speed=veh_speed[sv], veh_accel=veh_accel[sv],
    )
    return InteractionPair(
        pair_id=f"{ped.track_id}__{veh.track_id}",
        ped_id=ped.track_id,
        veh_id=veh.track_id,
        t_start=round(k_start * dt, 9),
        traj=traj,
        scenario=ped.scenario or veh.scenario,
    )


def segment_pairs(
    pairs: Sequence[InteractionPair],
    segment_length: float = SEGMENT_LENGTH,
    n_segments: int = N_SEGMENTS,
) -> list[TrajectorySegment]:
    """Split each pair into ``n_segments`` contiguous, non-overlapping slices."""
    out = []
    for pair in pairs:
        dt = pair.traj.dt
        n = int(round(segment_length / dt))
        if len(pair.traj) < n * n_segments:
            raise ValueError(f"pair {pair.pair_id} has {len(pair.traj)} samples, need {n * n_segments}")
        for i in range(n_segments):
            seg = pair.traj.slice(i * n, (i + 1) * n)
            seg.t = seg.t - seg.t[0]
            out.append(TrajectorySegment(pair.pair_id, i, seg, pair.scenario))
    return out


# -- initial-condition model -------------------------------------------------


@dataclass
class InitialConditionModel:
    """Joint Gaussian-kernel KDE over (ped_x, ped_y, ped_speed, veh_x, veh_speed).

    Product kernel with a per-dimension Scott bandwidth.
    """

    samples: np.ndarray
    bandwidth: np.ndarray
    fields: tuple[str, ...] = INIT_FIELDS

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.samples), size=n)
        return self.samples[idx] + rng.standard_normal((n, self.samples.shape[1])) * self.bandwidth

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = (x[:, None, :] - self.samples[None, :, :]) / self.bandwidth
        log_k = -0.5 * np.sum(z * z, axis=-1) - np.sum(np.log(self.bandwidth)) - 0.5 * z.shape[-1] * math.log(2 * math.pi)
        return logsumexp(log_k, axis=1) - math.log(len(self.samples))

    def marginal_log_density(self, dim: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        h = self.bandwidth[dim]
        z = (x[:, None] - self.samples[None, :, dim]) / h
        return logsumexp(-0.5 * z * z, axis=1) - math.log(len(self.samples) * h * math.sqrt(2 * math.pi))

    def to_dict(self) -> dict[str, Any]:
        return {"fields": list(self.fields), "samples": self.samples.tolist(), "bandwidth": self.bandwidth.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InitialConditionModel":
        return cls(np.asarray(data["samples"], dtype=float), np.asarray(data["bandwidth"], dtype=float), tuple(data["fields"]))


BANDWIDTH_FLOOR = 1e-2


def initial_condition_samples(pairs: Sequence[InteractionPair], per_segment: bool = True) -> np.ndarray:
    """Start states used to fit the initial-condition KDE (one row per start)."""
    rows = []
    for pair in pairs:
        n = len(pair.traj)
        starts = range(0, n, n // N_SEGMENTS) if per_segment and n >= N_SEGMENTS else [0]
        for k in list(starts)[:N_SEGMENTS] if per_segment else starts:
            s = pair.traj.state_at(k)
            rows.append([getattr(s, f) for f in INIT_FIELDS])
    return np.asarray(rows, dtype=float)


def fit_initial_kde(pairs: Sequence[InteractionPair], per_segment: bool = True) -> InitialConditionModel:
    if len(pairs) < 2:
        raise ValueError("the initial-condition KDE needs at least two interaction pairs")
    samples = initial_condition_samples(pairs, per_segment)
    n, d = samples.shape
    std = samples.std(axis=0, ddof=1)
    bandwidth = np.maximum(std * n ** (-1.0 / (d + 4)), BANDWIDTH_FLOOR)
    return InitialConditionModel(samples, bandwidth)


# -- JSON-lines I/O ----------------------------------------------------------


def write_jsonl(records: Iterable[dict[str, Any]], path: str | Path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_pairs(pairs: Sequence[InteractionPair], path: str | Path) -> None:
    write_jsonl((p.to_dict() for p in pairs), path)


def read_pairs(path: str | Path) -> list[InteractionPair]:
    return [InteractionPair.from_dict(d) for d in read_jsonl(path)]


def write_segments(segments: Sequence[TrajectorySegment], path: str | Path) -> None:
    write_jsonl((s.to_dict() for s in segments), path)


def read_segments(path: str | Path) -> list[TrajectorySegment]:
    return [TrajectorySegment.from_dict(d) for d in read_jsonl(path)]


def pairs_to_tracks(pairs: Sequence[InteractionPair]) -> list[RawTrack]:
    """Re-serialise extracted pairs as raw tracks (window only)."""
    tracks = []
    for p in pairs:
        t = p.t_start + p.traj.t
        tracks.append(RawTrack(p.ped_id, PEDESTRIAN, PED_DIRECTION, t, p.traj.ped_x, p.traj.ped_y, p.scenario))
        tracks.append(RawTrack(p.veh_id, VEHICLE, VEH_DIRECTION, t, p.traj.veh_x, p.traj.veh_y, p.scenario))
    return tracks


# -- synthetic corpus --------------------------------------------------------

FINE_SUBSTEPS = 10
BLOCK_SPACING = 100.0


@dataclass
class _PedScript:
    x0: float
    y_sidewalk: float
    x_cross: float
    radius: float
    y_end: float
    v_des: float
    waits: bool

    @property
    def corner(self) -> tuple[float, float]:
        return self.x_cross - self.radius, self.y_sidewalk + self.radius

    @property
    def lengths(self) -> tuple[float, float, float]:
        cx, cy = self.corner
        return cx - self.x0, 0.5 * math.pi * self.radius, self.y_end - cy

    def position(self, s: float) -> tuple[float, float]:
        l1, l2, l3 = self.lengths
        cx, cy = self.corner
        if s <= l1:
            return self.x0 + s, self.y_sidewalk
        if s <= l1 + l2:
            a = (s - l1) / self.radius
            return cx + self.radius * math.sin(a), cy - self.radius * math.cos(a)
        return self.x_cross, cy + (s - l1 - l2)

    def arc_at_y(self, y: float) -> float:
        l1, l2, _ = self.lengths
        return l1 + l2 + (y - self.corner[1])


@dataclass
class _VehScript:
    kind: str
    x0: float
    y: float
    v0: float
    t_entry: float
    brake: float = 0.0
    x_stop: float = 0.0
    accel: float = 1.0
    decel: float = 0.0
    react: float = 0.0
    v_max: float = 0.0
    phase: str = "cruise"
    resume_at: float = field(default=math.inf)


def _simulate_pair(ped: _PedScript, veh: _VehScript, g: SceneGeometry, dt: float, ped_clear_y: float, ped_clear_x: float):
    """Integrate the scripted agents on a fine grid; returns sample lists on the coarse grid."""
    h = dt / FINE_SUBSTEPS
    t_v_start = veh.t_entry - (veh.x0 - (g.crossing_x - g.veh_upstream)) / -veh.v0
    k_fine = int(math.floor(min(0.0, t_v_start) / h))
    s, v_ped = 0.0, ped.v_des
    xv, vv = veh.x0, veh.v0
    started_veh = False
    ped_rows, veh_rows = [], []
    total = sum(ped.lengths)
    s_wait = ped.arc_at_y(g.kerb_y - 0.4)
    t_end_cap = 60.0
    while True:
        t = k_fine * h
        if t > t_end_cap:
            break
        on_coarse = k_fine % FINE_SUBSTEPS == 0
        ped_live = t >= 0.0 and s <= total
        if t >= t_v_start:
            started_veh = True
        if on_coarse and ped_live:
            ped_rows.append((t, *ped.position(s)))
        if on_coarse and started_veh and xv <= g.crossing_x + g.veh_downstream + 15.0:
            veh_rows.append((t, xv, veh.y))
        if s > total and xv > g.crossing_x + g.veh_downstream + 15.0:
            break

        # pedestrian: first-order speed lag toward a target
        veh_clear = xv - 0.5 * g.veh_length > ped.x_cross + g.crosswalk_x_extent
        target = ped.v_des
        if ped.waits and not veh_clear:
            target = min(ped.v_des, math.sqrt(2.0 * 0.8 * max(s_wait - s, 0.0)))
        if t >= 0.0:
            v_ped += (target - v_ped) * h / 0.5
            s += v_ped * h

        # vehicle
        if started_veh:
            ped_y = ped.position(min(s, total))[1] if t >= 0 else -10.0
            a = _veh_accel(veh, xv, vv, t, ped_y, ped_clear_y, ped_clear_x, g)
            vv = max(vv + a * h, 0.0)
            xv += vv * h
        k_fine += 1
    return ped_rows, veh_rows


def _veh_accel(veh: _VehScript, x: float, v: float, t: float, ped_y: float, clear_y: float, clear_x: float, g) -> float:
    entered = x >= g.crossing_x - g.veh_upstream
    if veh.kind == "vehicle_first":
        if x > g.crossing_x and v < veh.v_max:
            return veh.accel
        return 0.0
    if veh.kind == "ped_first_yield":
        if veh.phase == "cruise":
            dist = veh.x_stop - x
            if dist <= v * v / (2 * veh.brake) + 0.05:
                veh.phase = "brake"
            else:
                return 0.0
        if veh.phase == "brake":
            dist = veh.x_stop - x
            if v <= 0.05 or dist <= 0.02:
                veh.phase = "stopped"
                return -v / 0.01 if v > 0 else 0.0
            return -min(v * v / (2 * max(dist, 1e-3)), 6.0)
        if veh.phase == "stopped":
            if ped_y > clear_y:
                if veh.resume_at == math.inf:
                    veh.resume_at = t + veh.react
                if t >= veh.resume_at:
                    veh.phase = "go"
            return 0.0
        return veh.accel if v < veh.v0 else 0.0
    # ped_first_no_yield: mild slowdown until the rear clears the walker, then speed back up
    if entered and x - 0.5 * g.veh_length < clear_x + 2.0:
        return -veh.decel if v > 1.5 else 0.0
    if x - 0.5 * g.veh_length >= clear_x + 2.0 and v < veh.v0:
        return veh.accel
    return 0.0


def _script_pair(kind: str, rng: np.random.Generator, g: SceneGeometry) -> tuple[_PedScript, _VehScript, float]:
    ped = _PedScript(
        x0=float(rng.uniform(-12.5, -11.0)),
        y_sidewalk=float(rng.uniform(-3.4, -2.6)),
        x_cross=float(rng.uniform(-0.8, 0.8)),
        radius=float(rng.uniform(0.6, 1.0)),
        y_end=g.ped_goal_y + float(rng.uniform(1.8, 2.4)),
        v_des=float(rng.uniform(1.15, 1.5)),
        waits=kind == "vehicle_first",
    )
    y_lane = g.veh_lane_y + float(rng.uniform(-0.2, 0.2))
    clear_y = g.veh_lane_y + 0.5 * g.veh_width + g.ped_radius + 0.4
    # times the walker would reach the kerb and clear the lane without waiting
    t_kerb = ped.arc_at_y(g.kerb_y) / ped.v_des
    t_clear = ped.arc_at_y(clear_y) / ped.v_des
    if kind == "vehicle_first":
        v0 = float(rng.uniform(4.0, 5.0))
        t_entry = t_kerb - g.veh_upstream / v0 - float(rng.uniform(0.0, 1.0))
        veh = _VehScript(kind, -40.0, y_lane, v0, t_entry, accel=0.8, v_max=v0 + 1.5)
    elif kind == "ped_first_yield":
        v0 = float(rng.uniform(5.0, 6.0))
        veh = _VehScript(
            kind, -40.0, y_lane, v0, t_kerb - float(rng.uniform(3.0, 4.0)),
            brake=float(rng.uniform(1.2, 2.0)), x_stop=float(rng.uniform(-7.5, -5.5)) + ped.x_cross,
            accel=float(rng.uniform(1.0, 1.5)), react=float(rng.uniform(0.3, 0.8)),
        )
    elif kind == "ped_first_no_yield":
        v0 = float(rng.uniform(5.5, 6.5))
        decel = float(rng.uniform(0.2, 0.5))
        # front of the car reaches the walker's line just after the walker clears the lane
        t_meet = t_clear + float(rng.uniform(0.1, 0.5))
        gap = (ped.x_cross - 0.5 * g.veh_length - g.ped_radius) - (g.crossing_x - g.veh_upstream)
        # solve gap = v0*tau - decel*tau^2/2 for the earlier root
        tau = (v0 - math.sqrt(max(v0 * v0 - 2 * decel * gap, 0.0))) / decel
        veh = _VehScript(kind, -40.0, y_lane, v0, t_meet - tau, decel=decel, accel=1.0)
    else:
        raise ValueError(f"unknown scenario {kind!r}")
    return ped, veh, clear_y


def _rows_to_track(track_id: str, kind: str, direction: str, rows, offset: float, scenario: str) -> RawTrack:
    arr = np.asarray(rows, dtype=float)
    return RawTrack(track_id, kind, direction, np.round(arr[:, 0] + offset, 9), arr[:, 1], arr[:, 2], scenario)


def generate_synthetic_corpus(
    n_pairs: int,
    scenario_mix: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    rng: np.random.Generator | None = None,
    geom: SceneGeometry | None = None,
    dt: float = DEFAULT_DT,
    max_attempts: int = 50,
) -> list[RawTrack]:
    """Scripted pedestrian/vehicle tracks for the three interaction types.

    Each pair lives in its own time block, so pairs never cross-match. A
    drawn pair that would not survive ``extract_pairs`` is redrawn.
    """
    g = geom or SceneGeometry()
    rng = rng if rng is not None else np.random.default_rng()
    mix = np.asarray(scenario_mix, dtype=float)
    if mix.shape != (3,) or np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-6:
        raise ValueError("scenario_mix must be three non-negative proportions summing to 1")
    counts = np.floor(mix * n_pairs).astype(int)
    # hand out the remainder by largest fractional part, ties to the first type
    remainder = n_pairs - counts.sum()
    order = np.argsort(-(mix * n_pairs - counts), kind="stable")
    counts[order[:remainder]] += 1
    kinds = [k for k, c in zip(SCENARIOS, counts) for _ in range(c)]

    tracks: list[RawTrack] = []
    for i, kind in enumerate(kinds):
        offset = BLOCK_SPACING * (i + 1)
        for _ in range(max_attempts):
            ped, veh, clear_y = _script_pair(kind, rng, g)
            ped_rows, veh_rows = _simulate_pair(ped, veh, g, dt, clear_y, ped.x_cross)
            pair_tracks = [
                _rows_to_track(f"p{i:04d}", PEDESTRIAN, PED_DIRECTION, ped_rows, offset, kind),
                _rows_to_track(f"v{i:04d}", VEHICLE, VEH_DIRECTION, veh_rows, offset, kind),
            ]
            if len(extract_pairs(pair_tracks, g, dt)) == 1:
                tracks.extend(pair_tracks)
                break
        else:
            raise RuntimeError(f"could not script a valid {kind} pair in {max_attempts} attempts")
    return tracks


def passing_times(ped: RawTrack, veh: RawTrack, g: SceneGeometry | None = None) -> tuple[float, float]:
    """Times at which the walker crosses the crossing's y-line and the car its x-line."""
    g = g or SceneGeometry()
    t_ped = float(np.interp(g.crossing_y, ped.y, ped.t)) if ped.y[-1] >= g.crossing_y else math.inf
    t_veh = float(np.interp(g.crossing_x, veh.x, veh.t)) if veh.x[-1] >= g.crossing_x else math.inf
    return t_ped, t_veh
