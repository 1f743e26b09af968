"""
Replay weighting strategies

Turns a batch of (s, a) samples plus estimator snapshots into per-sample
weights with batch mean 1. Every strategy is a product of nonnegative
factors, so scores are assembled in log space and shifted by their maximum
before exponentiation; the shift cancels in the normalization.

    uniform        1
    per            |TD|^alpha + eps_p
    discor         exp(-gamma [P Delta] / tau)
    remern         ratio * exp(-gamma [P Delta] / tau)
    remert         ratio * exp(-E[TCE])
    oracle         ratio * exp(-|Q - Q*|)
    full_theorem   ratio * (2 - pi(a|s)) * exp(-|Q - Q*|) * |Q_k - B*Q_{k-1}|

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field
from scipy.stats import entropy

from ..config import settings
from ..estimators import TceConfig
from ..replay import WeightContractError


class WeightingError(Exception):
    """Base exception for weighting errors."""
    pass


class WeightingConfigurationError(WeightingError):
    """Exception raised when a strategy lacks an input it requires."""
    pass


class StrategyKind(str, Enum):
    UNIFORM = "uniform"
    PER = "per"
    DISCOR = "discor"
    REMERN = "remern"
    REMERT = "remert"
    ORACLE = "oracle"
    FULL_THEOREM = "full_theorem"


class RatioSource(str, Enum):
    """Where the on-policiness ratio d^pi / mu comes from."""
    LFIW = "lfiw"
    EXACT = "exact"
    NONE = "none"


RATIO_KINDS = frozenset({
    StrategyKind.REMERN, StrategyKind.REMERT, StrategyKind.ORACLE, StrategyKind.FULL_THEOREM,
})
ORACLE_KINDS = frozenset({StrategyKind.ORACLE, StrategyKind.FULL_THEOREM})
DELTA_KINDS = frozenset({StrategyKind.DISCOR, StrategyKind.REMERN})


class WeightingStrategy(BaseModel):
    """
    A weighting strategy and its hyperparameters.

    Attributes:
        kind: Strategy name
        ratio_source: Source of d^pi/mu for the kinds that use it
        temperature: LFIW ratio temperature T
        tau: Fixed DisCor divisor; None uses the running Bellman-error mean
        per_alpha: PER exponent on |TD error|
        priority_floor: PER additive floor eps_p
        policy_factor: Keep the (2 - pi(a|s)) factor of full_theorem
        tce: TCE configuration for remert
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: StrategyKind = StrategyKind.UNIFORM
    ratio_source: RatioSource = RatioSource.EXACT
    temperature: float = Field(default_factory=lambda: settings.lfiw_temperature, gt=0.0)
    tau: Optional[float] = Field(None, gt=0.0)
    per_alpha: float = Field(1.0, ge=0.0)
    priority_floor: float = Field(default_factory=lambda: settings.priority_floor, ge=0.0)
    policy_factor: bool = True
    tce: TceConfig = Field(default_factory=TceConfig)

    @property
    def uses_ratio(self) -> bool:
        return self.kind in RATIO_KINDS and self.ratio_source is not RatioSource.NONE

    @property
    def uses_delta(self) -> bool:
        return self.kind in DELTA_KINDS

    @property
    def needs_oracle(self) -> bool:
        return self.kind in ORACLE_KINDS or (self.uses_ratio and self.ratio_source is RatioSource.EXACT)

    @property
    def label(self) -> str:
        if self.kind in RATIO_KINDS and self.ratio_source is RatioSource.NONE:
            return f"{self.kind.value}-noratio"
        return self.kind.value


@dataclass(frozen=True)
class WeightInputs:
    """
    Per-sample estimator and oracle values for one batch.

    Every field is an array aligned with the batch, or None when the caller
    does not provide it. Which ones are required depends on the strategy.

    Attributes:
        td_errors: |y - Q(s,a)|
        discor_penalty: gamma * [P Delta](s,a), before division by tau
        tau: Running mean |TD error| used as DisCor divisor
        ratio: On-policiness ratio, already normalized if it comes from LFIW
        tce_values: E_tau[TCE](s,a)
        q_gap: |Q(s,a) - Q*(s,a)|
        policy_probs: pi_k(a|s)
        hindsight_errors: |Q_k - B*Q_{k-1}|(s,a)
    """
    td_errors: Optional[np.ndarray] = None
    discor_penalty: Optional[np.ndarray] = None
    tau: Optional[float] = None
    ratio: Optional[np.ndarray] = None
    tce_values: Optional[np.ndarray] = None
    q_gap: Optional[np.ndarray] = None
    policy_probs: Optional[np.ndarray] = None
    hindsight_errors: Optional[np.ndarray] = None


@dataclass(frozen=True)
class WeightBatch:
    """
    Attributes:
        weights: Normalized weights, batch mean 1
        scores: Unnormalized nonnegative scores (max-shifted)
        degraded: True when all scores were zero and weights fell back to uniform
    """
    weights: NDArray[np.float64]
    scores: NDArray[np.float64]
    degraded: bool = False


def _require(value, name: str, strategy: WeightingStrategy) -> np.ndarray:
    if value is None:
        raise WeightingConfigurationError(
            f"strategy '{strategy.kind.value}' needs '{name}' but it was not provided"
        )
    return np.asarray(value, dtype=np.float64)


def _safe_log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def log_scores(strategy: WeightingStrategy, inputs: WeightInputs, batch_size: int) -> NDArray[np.float64]:
    """
    Log of the unnormalized strategy score for each sample.

    Raises:
        WeightingConfigurationError: If an input required by the kind is missing
    """
    kind = strategy.kind
    log_score = np.zeros(batch_size)

    if kind is StrategyKind.UNIFORM:
        return log_score
    if kind is StrategyKind.PER:
        td = np.abs(_require(inputs.td_errors, "td_errors", strategy))
        return _safe_log(td ** strategy.per_alpha + strategy.priority_floor)

    if strategy.uses_ratio:
        ratio = _require(inputs.ratio, "ratio", strategy)
        if np.any(ratio < 0.0):
            raise WeightContractError("on-policiness ratio must be >= 0")
        log_score += _safe_log(ratio)

    if kind in DELTA_KINDS:
        penalty = _require(inputs.discor_penalty, "discor_penalty", strategy)
        tau = strategy.tau if strategy.tau is not None else inputs.tau
        if tau is None or tau <= 0.0:
            tau = 1.0
        log_score -= penalty / tau
    elif kind is StrategyKind.REMERT:
        log_score -= _require(inputs.tce_values, "tce_values", strategy)
    elif kind in ORACLE_KINDS:
        log_score -= _require(inputs.q_gap, "q_gap", strategy)

    if kind is StrategyKind.FULL_THEOREM:
        if strategy.policy_factor:
            probs = _require(inputs.policy_probs, "policy_probs", strategy)
            log_score += np.log(2.0 - probs)
        hindsight = np.abs(_require(inputs.hindsight_errors, "hindsight_errors", strategy))
        log_score += _safe_log(hindsight)

    return log_score


def normalize_batch(raw: np.ndarray) -> NDArray[np.float64]:
    """
    Divide by the batch mean; an all-zero batch becomes all ones.

    Raises:
        WeightContractError: If any entry is negative or not finite
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        return raw.copy()
    if np.any(~np.isfinite(raw)) or np.any(raw < 0.0):
        raise WeightContractError("raw weights must be finite and >= 0")
    mean = raw.mean()
    if mean <= 0.0:
        return np.ones_like(raw)
    return raw / mean


def compute_weights(strategy: WeightingStrategy, inputs: WeightInputs, batch_size: int) -> WeightBatch:
    """Per-sample weights, w >= 0 with batch mean 1."""
    log_score = log_scores(strategy, inputs, batch_size)
    if log_score.shape != (batch_size,):
        raise WeightingConfigurationError(
            f"inputs produce {log_score.shape} scores for a batch of {batch_size}"
        )
    finite = np.isfinite(log_score)
    if not np.any(finite):
        scores = np.zeros(batch_size)
    else:
        scores = np.exp(log_score - log_score[finite].max())
    degraded = not np.any(scores > 0.0)
    if degraded:
        logger.warning(f"All '{strategy.label}' scores are zero; using uniform weights")
    return WeightBatch(weights=normalize_batch(scores), scores=scores, degraded=degraded)


def exact_ratio(
    occupancy: np.ndarray,
    mu: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    buffer_size: int,
) -> NDArray[np.float64]:
    """d^pi(s,a) / mu(s,a) per sample, with mu floored at 1 / (2 * buffer_size)."""
    floor = 1.0 / (2.0 * max(buffer_size, 1))
    return occupancy[states, actions] / np.maximum(mu[states, actions], floor)


def weight_entropy(weights: np.ndarray) -> float:
    """Shannon entropy (nats) of the weights viewed as a distribution over the batch."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size == 0 or weights.sum() <= 0.0:
        return 0.0
    return float(entropy(weights))
