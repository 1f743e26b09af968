"""
Accumulated-error table Delta

Delta tracks an upper bound on |Q_k - Q*| as the discounted accumulation of
past Bellman errors propagated through the policy's transitions:

    Delta_k = |Q_k - B*Q_{k-1}| + gamma * P^{pi_{k-1}} Delta_{k-1}

Sample mode updates Delta towards a bootstrapped per-transition target;
exact mode applies the recursion synchronously with the true transition
tensor. ``unrolled_delta`` evaluates the closed-form sum directly, with
explicit state-action transition matrices, as an independent check.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from ..mdp import (
    PolicyTable,
    QTable,
    TabularMdp,
    apply_policy_operator,
    bellman_optimal_backup,
)

DeltaTable = NDArray[np.float64]


def discor_target(
    q_value: float,
    y: float,
    delta: DeltaTable,
    s_next: int,
    a_hat: int,
    gamma: float,
    done: bool = False,
) -> float:
    """|Q(s,a) - y| + gamma * Delta(s', a_hat); terminal s' adds nothing."""
    bootstrap = 0.0 if done else gamma * float(delta[s_next, a_hat])
    return abs(q_value - y) + bootstrap


def discor_targets(
    q_values: np.ndarray,
    targets: np.ndarray,
    delta: DeltaTable,
    next_states: np.ndarray,
    next_actions: np.ndarray,
    dones: np.ndarray,
    gamma: float,
) -> NDArray[np.float64]:
    """Batch form of discor_target."""
    bootstrap = np.where(dones, 0.0, gamma * delta[next_states, np.maximum(next_actions, 0)])
    return np.abs(np.asarray(q_values) - np.asarray(targets)) + bootstrap


def update_delta(
    delta: DeltaTable,
    states: np.ndarray,
    actions: np.ndarray,
    delta_targets: np.ndarray,
    lr: float,
) -> DeltaTable:
    """In-place Delta(s,a) += lr * (target - Delta(s,a)), per sample. Returns delta."""
    if not 0.0 < lr <= 1.0:
        raise ValueError(f"lr must lie in (0, 1], got {lr}")
    for s, a, target in zip(states, actions, delta_targets):
        delta[s, a] += lr * (max(target, 0.0) - delta[s, a])
    return delta


def discor_penalty_exact(delta: DeltaTable, mdp: TabularMdp, pi_prev: PolicyTable) -> NDArray[np.float64]:
    """gamma * (P^{pi_prev} Delta)(s,a) for every (s,a), with the true transition tensor."""
    return mdp.gamma * apply_policy_operator(delta, mdp, pi_prev)


def discor_penalty_sampled(
    delta: DeltaTable,
    next_states: np.ndarray,
    next_actions: np.ndarray,
    dones: np.ndarray,
    gamma: float,
) -> NDArray[np.float64]:
    """Single-sample estimate gamma * Delta(s', a_hat) per transition."""
    return np.where(dones, 0.0, gamma * delta[next_states, np.maximum(next_actions, 0)])


def exact_delta_step(
    delta_prev: DeltaTable,
    q_k: QTable,
    q_prev: QTable,
    mdp: TabularMdp,
    pi_prev: PolicyTable,
) -> DeltaTable:
    """One synchronous step of the Delta recursion."""
    bellman_error = np.abs(q_k - bellman_optimal_backup(q_prev, mdp))
    updated = bellman_error + discor_penalty_exact(delta_prev, mdp, pi_prev)
    return np.where(mdp.legal_mask, updated, 0.0)


def _pair_transition_matrix(mdp: TabularMdp, pi: PolicyTable) -> NDArray[np.float64]:
    """M[(s,a), (s',a')] = P(s'|s,a) * pi(a'|s') over flattened tables."""
    matrix = mdp.transition[:, :, :, None] * pi[None, None, :, :]
    n = mdp.n_states * mdp.max_actions
    return matrix.reshape(n, n)


def unrolled_delta(
    q_history: Sequence[QTable],
    policies: Sequence[PolicyTable],
    mdp: TabularMdp,
) -> DeltaTable:
    """
    Delta_k = sum_{i=1..k} gamma^(k-i) P^{pi_{k-1}} ... P^{pi_i} |Q_i - B*Q_{i-1}|.

    Args:
        q_history: Q_0 .. Q_k
        policies: pi_0 .. pi_{k-1}
    """
    k = len(q_history) - 1
    if len(policies) < k:
        raise ValueError(f"need {k} policies for {k} steps, got {len(policies)}")

    matrices = [_pair_transition_matrix(mdp, pi) for pi in policies[:k]]
    total = np.zeros(mdp.n_states * mdp.max_actions)
    for i in range(1, k + 1):
        error = np.abs(q_history[i] - bellman_optimal_backup(q_history[i - 1], mdp))
        term = np.where(mdp.legal_mask, error, 0.0).reshape(-1)
        for j in range(i, k):
            term = matrices[j] @ term
        total += mdp.gamma ** (k - i) * term
    return np.where(mdp.legal_mask, total.reshape(mdp.table_shape), 0.0)
