"""Replay Weighting

Per-sample weights with batch mean 1 for uniform replay, PER, DisCor,
ReMERN, ReMERT, the |Q - Q*| oracle and the full discrete weight.
"""

from .strategies import (
    StrategyKind,
    RatioSource,
    WeightingStrategy,
    WeightInputs,
    WeightBatch,
    WeightingError,
    WeightingConfigurationError,
    log_scores,
    compute_weights,
    normalize_batch,
    exact_ratio,
    weight_entropy,
)

__all__ = [
    "StrategyKind",
    "RatioSource",
    "WeightingStrategy",
    "WeightInputs",
    "WeightBatch",
    "WeightingError",
    "WeightingConfigurationError",
    "log_scores",
    "compute_weights",
    "normalize_batch",
    "exact_ratio",
    "weight_entropy",
]
