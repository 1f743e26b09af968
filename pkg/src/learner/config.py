"""Learner hyperparameters and the per-iteration trace record."""

import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import settings


class SamplingMode(str, Enum):
    """weighted: uniform sampling + weighted loss; prioritized: sampling by score, unit loss weights."""
    WEIGHTED = "weighted"
    PRIORITIZED = "prioritized"


class LearnerConfig(BaseModel):
    """
    Hyperparameters shared by the two training loops.

    Attributes:
        lr: Learning rate alpha in (0, 1]
        max_step: Cap on the per-sample Q-learning step lr * w; none leaves it uncapped
        iterations: Sweeps of weighted value iteration
        total_steps: Environment steps of Q-learning
        batch_size: Replay batch size
        buffer_capacity: Replay buffer capacity
        target_update_interval: Updates between target-table syncs
        epsilon_start, epsilon_end: Exploration rate schedule end points
        epsilon_anneal_fraction: Share of training over which epsilon is annealed
        delta_lr: Learning rate of the Delta table
        lfiw_lr: Learning rate of the LFIW ratio table
        lfiw_batch_size: Fast and slow batch size for LFIW
        checkpoint_interval: Steps (or sweeps) between trace records
        sampling_mode: weighted or prioritized
        gamma_d: Discount of the occupancy measure
        max_episode_steps: Step limit of one episode
        seed: Seed of exploration and sampling streams
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(0.1, gt=0.0, le=1.0)
    max_step: Optional[float] = Field(None, gt=0.0)
    iterations: int = Field(100, ge=1)
    total_steps: int = Field(10_000, ge=1)
    batch_size: int = Field(32, ge=1)
    buffer_capacity: int = Field(10_000, ge=1)
    target_update_interval: int = Field(100, ge=1)
    epsilon_start: float = Field(1.0, ge=0.0, le=1.0)
    epsilon_end: float = Field(0.05, ge=0.0, le=1.0)
    epsilon_anneal_fraction: float = Field(0.5, gt=0.0, le=1.0)
    delta_lr: float = Field(0.1, gt=0.0, le=1.0)
    lfiw_lr: float = Field(0.05, gt=0.0)
    lfiw_batch_size: int = Field(64, ge=1)
    checkpoint_interval: int = Field(500, ge=1)
    sampling_mode: SamplingMode = SamplingMode.WEIGHTED
    gamma_d: float = Field(default_factory=lambda: settings.gamma_d, gt=0.0, lt=1.0)
    max_episode_steps: int = Field(200, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_batch(self) -> "LearnerConfig":
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer_capacity")
        return self

    def epsilon(self, step: int) -> float:
        """Linear anneal from epsilon_start to epsilon_end, then constant."""
        horizon = self.epsilon_anneal_fraction * self.total_steps
        progress = min(step / horizon, 1.0) if horizon > 0 else 1.0
        return self.epsilon_start + progress * (self.epsilon_end - self.epsilon_start)


@dataclass
class IterationRecord:
    """
    One trace row.

    Attributes:
        iteration: Sweep (value iteration) or environment step (Q-learning)
        td_error_l1: sum over legal (s,a) of |B*Q - Q|
        td_error_linf: max over legal (s,a) of |B*Q - Q|
        q_gap_linf: max |Q - Q*|
        q_gap_l1: sum |Q - Q*|
        greedy_return: Expected return of the greedy policy
        regret: Optimal return minus greedy_return
        mean_weight_entropy: Mean entropy of the weight batches since the last record
        wall_ms: Elapsed milliseconds, 0 unless wall time is recorded
    """
    iteration: int
    td_error_l1: float
    td_error_linf: float
    q_gap_linf: float
    q_gap_l1: float
    greedy_return: float
    regret: float
    mean_weight_entropy: float
    wall_ms: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class EntropyMeter:
    """Running mean of weight-batch entropies between two records."""
    values: Optional[List[float]] = None

    def add(self, value: float):
        if self.values is None:
            self.values = []
        self.values.append(value)

    def flush(self, default: float = 0.0) -> float:
        if not self.values:
            return default
        mean = float(np.mean(self.values))
        self.values = []
        return mean if math.isfinite(mean) else default
