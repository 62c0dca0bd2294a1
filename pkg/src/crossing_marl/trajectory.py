from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .world import WorldState

STATE_COLUMNS = (
    "t", "ped_x", "ped_y", "ped_speed", "ped_heading", "gaze_offset",
    "veh_x", "veh_y", "veh_speed", "veh_accel",
)


@dataclass
class Trajectory:
    """Time-aligned two-agent track sampled on a uniform grid."""

    t: np.ndarray
    ped_x: np.ndarray
    ped_y: np.ndarray
    ped_speed: np.ndarray
    ped_heading: np.ndarray
    gaze_offset: np.ndarray
    veh_x: np.ndarray
    veh_y: np.ndarray
    veh_speed: np.ndarray
    veh_accel: np.ndarray
    extras: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = None
        for name in STATE_COLUMNS:
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            setattr(self, name, arr)
            if n is None:
                n = arr.size
            elif arr.size != n:
                raise ValueError(f"column {name} has {arr.size} samples, expected {n}")

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def dt(self) -> float:
        if len(self) < 2:
            raise ValueError("need at least two samples to infer dt")
        return float(self.t[1] - self.t[0])

    def state_at(self, k: int) -> WorldState:
        return WorldState(
            t=0.0,
            ped_x=float(self.ped_x[k]),
            ped_y=float(self.ped_y[k]),
            ped_speed=float(self.ped_speed[k]),
            ped_heading=float(self.ped_heading[k]),
            gaze_offset=float(self.gaze_offset[k]),
            veh_x=float(self.veh_x[k]),
            veh_y=float(self.veh_y[k]),
            veh_speed=float(self.veh_speed[k]),
            veh_accel=float(self.veh_accel[k]),
            n_steps=0,
        )

    def slice(self, start: int, stop: int) -> "Trajectory":
        cols = {name: getattr(self, name)[start:stop].copy() for name in STATE_COLUMNS}
        extras = {k: v[start:stop].copy() for k, v in self.extras.items()}
        return Trajectory(**cols, extras=extras)

    def positions(self) -> np.ndarray:
        """Array (T, 2 agents, 2 coords)."""
        ped = np.stack([self.ped_x, self.ped_y], axis=-1)
        veh = np.stack([self.veh_x, self.veh_y], axis=-1)
        return np.stack([ped, veh], axis=1)

    @classmethod
    def from_states(cls, states: Sequence[WorldState], extras: dict[str, Iterable[float]] | None = None) -> "Trajectory":
        cols = {name: np.array([getattr(s, name) for s in states], dtype=float) for name in STATE_COLUMNS}
        return cls(**cols, extras={k: np.asarray(list(v), dtype=float) for k, v in (extras or {}).items()})

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {name: getattr(self, name).tolist() for name in STATE_COLUMNS}
        if self.extras:
            out["extras"] = {k: v.tolist() for k, v in self.extras.items()}
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Trajectory":
        cols = {name: np.asarray(data[name], dtype=float) for name in STATE_COLUMNS}
        extras = {k: np.asarray(v, dtype=float) for k, v in data.get("extras", {}).items()}
        return cls(**cols, extras=extras)


def concat(trajs: Sequence[Trajectory]) -> Trajectory:
    cols = {name: np.concatenate([getattr(tr, name) for tr in trajs]) for name in STATE_COLUMNS}
    return Trajectory(**cols)

