"""
Synchronous weighted value iteration

Every sweep scores all legal (s, a) entries with the chosen strategy,
normalizes the weights to mean 1 over the table and applies the damped
backup Q <- Q + lr * w * (B*Q - Q). All estimator inputs are exact: the
buffer distribution mu is uniform over legal entries, Delta follows its
synchronous recursion and TCE is taken in expectation under the current
softmax policy.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger

from ..config import settings
from ..estimators import BellmanErrorTracker, exact_delta_step, discor_penalty_exact, expected_tce_exact
from ..mdp import (
    QTable,
    TabularMdp,
    bellman_optimal_backup,
    check_table,
    discounted_occupancy,
    greedy_policy,
    optimal_return,
    softmax_policy,
    solve_q_star,
)
from ..weighting import (
    RatioSource,
    StrategyKind,
    WeightInputs,
    WeightingConfigurationError,
    WeightingStrategy,
    compute_weights,
    exact_ratio,
    weight_entropy,
)
from .config import IterationRecord
from .metrics import evaluate_q, is_optimal


@dataclass
class ValueIterationTrace:
    """
    Result of weighted value iteration.

    Attributes:
        strategy: Strategy used for the weights
        records: Trace rows, iteration 0 included
        optimal_flags: Greedy-policy optimality after every sweep, sweep 0 first
        q: Final Q table
        q_star: Optimal Q table used for the oracle metrics
        q_history: Q_0 .. Q_K when tables are kept
        weights_history: Weight table of every sweep when tables are kept
    """
    strategy: WeightingStrategy
    records: List[IterationRecord]
    optimal_flags: List[bool]
    q: QTable
    q_star: QTable
    q_history: List[QTable] = field(default_factory=list)
    weights_history: List[np.ndarray] = field(default_factory=list)

    @property
    def iterations_to_optimal(self) -> Optional[int]:
        """First sweep after which the greedy policy stays optimal; None if it never settles."""
        settled = None
        for k in range(len(self.optimal_flags) - 1, -1, -1):
            if not self.optimal_flags[k]:
                break
            settled = k
        return settled


def weighted_backup_step(q: QTable, mdp: TabularMdp, weights: np.ndarray, lr: float) -> QTable:
    """Q + lr * w * (B*Q - Q) on legal entries."""
    step = lr * np.asarray(weights, dtype=np.float64) * (bellman_optimal_backup(q, mdp) - q)
    return np.where(mdp.legal_mask, q + step, 0.0)


def _sweep_inputs(
    strategy: WeightingStrategy,
    mdp: TabularMdp,
    q: QTable,
    residual: np.ndarray,
    delta: np.ndarray,
    tau: float,
    hindsight: np.ndarray,
    q_star: QTable,
    progress: float,
    gamma_d: float,
) -> WeightInputs:
    mask = mdp.legal_mask
    kind = strategy.kind
    softmax_pi = softmax_policy(q, mdp) if kind in (StrategyKind.REMERT, StrategyKind.FULL_THEOREM) or strategy.uses_ratio else None

    ratio = None
    if strategy.uses_ratio:
        if strategy.ratio_source is RatioSource.LFIW:
            raise WeightingConfigurationError(
                "value iteration has no replay buffers; use ratio_source 'exact' or 'none'"
            )
        occupancy = discounted_occupancy(mdp, softmax_pi, gamma_d)
        mu = mdp.legal_mask / float(mdp.n_legal)
        states, actions = np.nonzero(mask)
        ratio = exact_ratio(occupancy, mu, states, actions, mdp.n_legal)

    penalty = None
    if strategy.uses_delta:
        penalty = discor_penalty_exact(delta, mdp, greedy_policy(q, mdp))[mask]

    tce_values = None
    if kind is StrategyKind.REMERT:
        tce_values = expected_tce_exact(mdp, softmax_pi, strategy.tce, tau, progress)[mask]

    return WeightInputs(
        td_errors=residual[mask],
        discor_penalty=penalty,
        tau=tau,
        ratio=ratio,
        tce_values=tce_values,
        q_gap=np.abs(q - q_star)[mask],
        policy_probs=None if softmax_pi is None else softmax_pi[mask],
        hindsight_errors=hindsight[mask],
    )


def weighted_value_iteration(
    mdp: TabularMdp,
    strategy: WeightingStrategy,
    lr: float = 0.1,
    iterations: int = 100,
    q0: Optional[QTable] = None,
    q_star: Optional[QTable] = None,
    gamma_d: Optional[float] = None,
    record_every: int = 1,
    keep_tables: bool = False,
    record_wall_time: bool = False,
    tracker_rate: Optional[float] = None,
) -> ValueIterationTrace:
    """
    Run ``iterations`` sweeps of weighted value iteration.

    Args:
        mdp: Exact MDP
        strategy: Weighting strategy; LFIW ratios are not available here
        lr: Learning rate alpha in (0, 1]
        iterations: Number of sweeps
        q0: Initial table, zeros by default
        q_star: Optimal table, solved when omitted
        gamma_d: Occupancy discount for the exact ratio
        record_every: Sweeps between trace rows (the last sweep is always recorded)
        keep_tables: Keep every Q table and weight table
        record_wall_time: Fill wall_ms; otherwise it stays 0
        tracker_rate: Rate of the running Bellman-error mean

    Returns:
        ValueIterationTrace
    """
    if not 0.0 < lr <= 1.0:
        raise ValueError(f"lr must lie in (0, 1], got {lr}")
    gamma_d = settings.gamma_d if gamma_d is None else gamma_d
    mask = mdp.legal_mask
    q = mdp.zeros() if q0 is None else np.where(mask, check_table(q0, mdp, "q0"), 0.0)
    q_star = solve_q_star(mdp) if q_star is None else q_star
    best_return = optimal_return(mdp, q_star)

    started = time.perf_counter()

    def elapsed() -> float:
        return round((time.perf_counter() - started) * 1000.0, 3) if record_wall_time else 0.0

    logger.info(f"Weighted VI: strategy={strategy.label}, lr={lr}, iterations={iterations}")
    uniform_entropy = weight_entropy(np.ones(mdp.n_legal))
    first = evaluate_q(q, mdp, q_star, best_return, 0, uniform_entropy, elapsed())
    trace = ValueIterationTrace(
        strategy=strategy, records=[first], optimal_flags=[is_optimal(first)], q=q, q_star=q_star,
    )
    if keep_tables:
        trace.q_history.append(q.copy())

    delta = mdp.zeros()
    tracker = BellmanErrorTracker(tracker_rate)
    hindsight: Optional[np.ndarray] = None

    for k in range(1, iterations + 1):
        backup = bellman_optimal_backup(q, mdp)
        residual = np.where(mask, np.abs(backup - q), 0.0)
        tau = tracker.update(residual[mask])
        if hindsight is None:
            hindsight = residual

        inputs = _sweep_inputs(
            strategy, mdp, q, residual, delta, tau, hindsight, q_star, (k - 1) / iterations, gamma_d,
        )
        batch = compute_weights(strategy, inputs, mdp.n_legal)
        weights = mdp.zeros()
        weights[mask] = batch.weights

        q_next = weighted_backup_step(q, mdp, weights, lr)
        if strategy.uses_delta:
            delta = exact_delta_step(delta, q_next, q, mdp, greedy_policy(q, mdp))
        hindsight = np.where(mask, np.abs(q_next - backup), 0.0)
        q = q_next

        record = evaluate_q(q, mdp, q_star, best_return, k, weight_entropy(batch.weights), elapsed())
        trace.optimal_flags.append(is_optimal(record))
        if k % record_every == 0 or k == iterations:
            trace.records.append(record)
        if keep_tables:
            trace.q_history.append(q.copy())
            trace.weights_history.append(weights)
        logger.debug(f"VI sweep {k}: td_linf={record.td_error_linf:.4g}, q_gap_linf={record.q_gap_linf:.4g}")

    trace.q = q
    logger.info(
        f"Weighted VI finished: strategy={strategy.label}, "
        f"iterations_to_optimal={trace.iterations_to_optimal}"
    )
    return trace
