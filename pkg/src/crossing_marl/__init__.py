"""Two-agent pedestrian/vehicle crossing simulator with perceptual and motor constraints."""

from .env import CrossingEnv, EnvConfig
from .variants import AgentKind, ModelVariant
from .world import SceneGeometry, WorldState

__version__ = "0.1.0"

__all__ = ["AgentKind", "CrossingEnv", "EnvConfig", "ModelVariant", "SceneGeometry", "WorldState"]
