"""Latent-conditioned actor-critic learning of diverse solutions via
variational mutual-information maximization."""

from .agent import (Agent, BaselineMode, LatentSpec, Ltd3Config, clip_weight,
                    normalized_importance_weights, smerl_gate)
from .envs import PointVel, PointVelConfig, RingMdp, RingMdpConfig
from .harness import FewShotConfig, RunConfig, fewshot_adapt, sweep, train_run
from .metrics import (JointDistribution, MiMode, diversity_score, mi_lower_bound,
                      mi_oracle)
from .replay import ReplayBuffer, Transition

__all__ = [
    "Agent", "BaselineMode", "LatentSpec", "Ltd3Config", "clip_weight",
    "normalized_importance_weights", "smerl_gate", "PointVel", "PointVelConfig",
    "RingMdp", "RingMdpConfig", "FewShotConfig", "RunConfig", "fewshot_adapt",
    "sweep", "train_run", "JointDistribution", "MiMode", "diversity_score",
    "mi_lower_bound", "mi_oracle", "ReplayBuffer", "Transition",
]

__version__ = "0.1.0"
