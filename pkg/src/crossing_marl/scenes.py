"""Ready-made start-state samplers and a compact training scene."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import CrossingEnv, EnvConfig
from .variants import ModelVariant
from .world import DEFAULT_DT, INIT_FIELDS, SceneGeometry


@dataclass(frozen=True)
class BoxInitModel:
    """Independent uniform draws of the start fields inside a box."""

    low: np.ndarray
    high: np.ndarray

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, len(INIT_FIELDS)))


# near-conflict starts: walker close to the kerb, car a few seconds out
COMPACT_START = {
    "ped_x": (-1.0, 1.0),
    "ped_y": (-3.0, -2.0),
    "ped_speed": (0.5, 1.5),
    "veh_x": (-20.0, -10.0),
    "veh_speed": (4.0, 8.0),
}
COMPACT_EPISODE_TIME = 8.0


def compact_init_model() -> BoxInitModel:
    b = np.array([COMPACT_START[k] for k in INIT_FIELDS], dtype=float)
    return BoxInitModel(b[:, 0], b[:, 1])


def compact_env_factory(variant: ModelVariant | str = ModelVariant.NC, episode_time: float = COMPACT_EPISODE_TIME):
    """Factory for short episodes that start close to a conflict."""
    config = EnvConfig(variant=variant, geom=SceneGeometry(max_episode_time=episode_time))
    init = compact_init_model()

    def make(rng: np.random.Generator) -> CrossingEnv:
        return CrossingEnv(config, init, rng)

    return make


def corpus_env_factory(
    variant: ModelVariant | str,
    init_model,
    geom: SceneGeometry | None = None,
    dt: float = DEFAULT_DT,
):
    """Factory for episodes started from an initial-condition model of recorded data."""
    config = EnvConfig(variant=variant, dt=dt, geom=geom or SceneGeometry())

    def make(rng: np.random.Generator) -> CrossingEnv:
        return CrossingEnv(config, init_model, rng)

    return make
