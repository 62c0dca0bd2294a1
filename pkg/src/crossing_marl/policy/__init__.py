from .bc import BCConfig, bc_demonstrations, bc_train
from .buffer import ReplayBuffer
from .checkpoint import load_policy, save_policy
from .networks import DeterministicPolicy, GaussianPolicy, QNetwork, policy_act
from .rollout import rollout
from .sac import SACConfig, SACResult, TrainingDiverged, sac_train

__all__ = [
    "BCConfig",
    "DeterministicPolicy",
    "GaussianPolicy",
    "QNetwork",
    "ReplayBuffer",
    "SACConfig",
    "SACResult",
    "TrainingDiverged",
    "bc_demonstrations",
    "bc_train",
    "load_policy",
    "policy_act",
    "rollout",
    "sac_train",
    "save_policy",
]
