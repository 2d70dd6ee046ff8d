"""Symmetric (forward plus reverse) policy-gradient losses for A2C and PPO, in numpy."""

from symrl.advantages import GaeConfig, compute_gae, normalize_advantages
from symrl.distributions import ActionDistribution, Discretizer, softmax
from symrl.envs import NoiseChannel, make_env
from symrl.errors import ContractViolation, NumericError, ValidationError
from symrl.experiment import ExperimentConfig, compare, run_experiment
from symrl.losses import SymmetricLossConfig, symmetric_loss
from symrl.trainer import Trainer, TrainerConfig, train

__version__ = "0.1.0"

__all__ = [
    "ActionDistribution",
    "ContractViolation",
    "Discretizer",
    "ExperimentConfig",
    "GaeConfig",
    "NoiseChannel",
    "NumericError",
    "SymmetricLossConfig",
    "Trainer",
    "TrainerConfig",
    "ValidationError",
    "compare",
    "compute_gae",
    "make_env",
    "normalize_advantages",
    "run_experiment",
    "softmax",
    "symmetric_loss",
    "train",
]
