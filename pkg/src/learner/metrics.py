"""Exact trace metrics for a Q table."""

from typing import Optional

import numpy as np

from ..mdp import QTable, TabularMdp, bellman_residual, expected_return, greedy_policy
from .config import IterationRecord

OPTIMALITY_TOLERANCE = 1e-9


def evaluate_q(
    q: QTable,
    mdp: TabularMdp,
    q_star: Optional[QTable],
    optimal_return: Optional[float],
    iteration: int,
    mean_weight_entropy: float,
    wall_ms: float = 0.0,
) -> IterationRecord:
    """Build a trace record; oracle columns are NaN when Q* is unknown."""
    residual = np.abs(bellman_residual(q, mdp))[mdp.legal_mask]
    greedy_return = expected_return(mdp, greedy_policy(q, mdp))

    if q_star is None:
        q_gap_linf = q_gap_l1 = float("nan")
    else:
        gap = np.abs(q - q_star)[mdp.legal_mask]
        q_gap_linf = float(gap.max(initial=0.0))
        q_gap_l1 = float(gap.sum())
    regret = float("nan") if optimal_return is None else optimal_return - greedy_return

    return IterationRecord(
        iteration=iteration,
        td_error_l1=float(residual.sum()),
        td_error_linf=float(residual.max(initial=0.0)),
        q_gap_linf=q_gap_linf,
        q_gap_l1=q_gap_l1,
        greedy_return=greedy_return,
        regret=regret,
        mean_weight_entropy=mean_weight_entropy,
        wall_ms=wall_ms,
    )


def is_optimal(record: IterationRecord) -> bool:
    return record.regret <= OPTIMALITY_TOLERANCE
