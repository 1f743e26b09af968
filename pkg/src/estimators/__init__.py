"""Estimators

The quantities feeding the replay weights: the accumulated-error table
Delta, the fast/slow density ratio kappa, and temporal correctness
estimation (TCE) with its running Bellman-error statistic.
"""

from .delta import (
    DeltaTable,
    discor_target,
    discor_targets,
    update_delta,
    discor_penalty_exact,
    discor_penalty_sampled,
    exact_delta_step,
    unrolled_delta,
)
from .ratio import (
    RatioTable,
    lfiw_update,
    lfiw_loss,
    normalize_ratio,
    kl_f_prime,
    kl_f_conjugate,
)
from .tce import (
    TceConfig,
    horizon_factor,
    tce_raw,
    tce,
    expected_tce,
    expected_tce_exact,
    BellmanErrorTracker,
    oracle_q_gap,
    cumulative_error_bound,
    dump_table_csv,
)

__all__ = [
    "DeltaTable",
    "discor_target",
    "discor_targets",
    "update_delta",
    "discor_penalty_exact",
    "discor_penalty_sampled",
    "exact_delta_step",
    "unrolled_delta",
    "RatioTable",
    "lfiw_update",
    "lfiw_loss",
    "normalize_ratio",
    "kl_f_prime",
    "kl_f_conjugate",
    "TceConfig",
    "horizon_factor",
    "tce_raw",
    "tce",
    "expected_tce",
    "expected_tce_exact",
    "BellmanErrorTracker",
    "oracle_q_gap",
    "cumulative_error_bound",
    "dump_table_csv",
]
