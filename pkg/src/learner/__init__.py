"""Learners

Synchronous weighted value iteration and episodic tabular Q-learning with
weighted replay.
"""

from .config import LearnerConfig, SamplingMode, IterationRecord
from .metrics import evaluate_q, is_optimal
from .value_iteration import ValueIterationTrace, weighted_value_iteration, weighted_backup_step
from .q_learning import QLearningTrace, weighted_q_learning

__all__ = [
    "LearnerConfig",
    "SamplingMode",
    "IterationRecord",
    "evaluate_q",
    "is_optimal",
    "ValueIterationTrace",
    "weighted_value_iteration",
    "weighted_backup_step",
    "QLearningTrace",
    "weighted_q_learning",
]
