"""
Exact solvers and operators for tabular MDPs

Bellman optimal backup, Q* by value iteration or backward induction,
softmax / greedy policies, discounted occupancy measures, recurring
probability, expected return and regret. Every function is a pure function
of its inputs.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import math
from graphlib import CycleError, TopologicalSorter
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg
from loguru import logger
from numpy.typing import NDArray
from scipy.special import softmax

from .tabular import (
    DistributionTable,
    MdpStructureError,
    PolicyTable,
    QTable,
    SingularSystemError,
    TabularMdp,
    UnsupportedMdpError,
    check_table,
)

MAX_CONDITION_NUMBER = 1e12
POLICY_TOLERANCE = 1e-12


def check_policy(pi: np.ndarray, mdp: TabularMdp) -> PolicyTable:
    """
    Validate a policy table against the MDP's legal-action structure.

    Raises:
        MdpStructureError: If the table is misshaped, negative, puts mass on
            illegal actions or has a non-terminal row that does not sum to 1
    """
    pi = check_table(pi, mdp, "policy")
    if np.any(pi < 0.0):
        raise MdpStructureError("policy has negative entries")
    if np.any(pi[~mdp.legal_mask] != 0.0):
        raise MdpStructureError("policy puts mass on illegal actions")
    sums = pi.sum(axis=1)
    rows = mdp.nonterminal_mask
    if np.any(np.abs(sums[rows] - 1.0) > POLICY_TOLERANCE * mdp.max_actions):
        raise MdpStructureError("policy rows must sum to 1 on non-terminal states")
    return pi


def state_values(q: QTable, mdp: TabularMdp) -> NDArray[np.float64]:
    """max over legal actions; terminal states are worth 0."""
    q = check_table(q, mdp, "q")
    masked = np.where(mdp.legal_mask, q, -np.inf)
    values = masked.max(axis=1)
    return np.where(mdp.nonterminal_mask, values, 0.0)


def greedy_actions(q: QTable, mdp: TabularMdp) -> NDArray[np.int64]:
    """Argmax over legal actions with lowest-index ties; -1 on terminal states."""
    q = check_table(q, mdp, "q")
    masked = np.where(mdp.legal_mask, q, -np.inf)
    actions = np.argmax(masked, axis=1)
    return np.where(mdp.nonterminal_mask, actions, -1)


def greedy_policy(q: QTable, mdp: TabularMdp) -> PolicyTable:
    actions = greedy_actions(q, mdp)
    pi = mdp.zeros()
    rows = np.flatnonzero(actions >= 0)
    pi[rows, actions[rows]] = 1.0
    return pi


def uniform_policy(mdp: TabularMdp) -> PolicyTable:
    counts = np.maximum(np.asarray(mdp.n_actions_per_state, dtype=np.float64), 1.0)
    return mdp.legal_mask / counts[:, None]


def softmax_policy(q: QTable, mdp: TabularMdp) -> PolicyTable:
    """
    Boltzmann policy pi(a|s) = exp(Q(s,a)) / sum_a' exp(Q(s,a')).

    scipy's softmax subtracts the row maximum before exponentiating, so large
    Q values cannot overflow. Illegal actions get probability 0.
    """
    q = check_table(q, mdp, "q")
    logits = np.where(mdp.legal_mask, q, -np.inf)
    pi = mdp.zeros()
    rows = mdp.nonterminal_mask
    if np.any(rows):
        pi[rows] = softmax(logits[rows], axis=1)
    return pi


def bellman_optimal_backup(q: QTable, mdp: TabularMdp) -> QTable:
    """
    Apply the Bellman optimal operator.

    (B*q)(s,a) = r(s,a) + gamma * sum_s' P(s'|s,a) max_a' q(s',a'),
    with terminal next-states contributing a zero bootstrap.

    Raises:
        MdpStructureError: If q is not shaped for mdp
    """
    values = state_values(q, mdp)
    backup = mdp.reward + mdp.gamma * (mdp.transition @ values)
    return np.where(mdp.legal_mask, backup, 0.0)


def bellman_residual(q: QTable, mdp: TabularMdp) -> QTable:
    """B*q - q on legal entries, 0 elsewhere."""
    q = check_table(q, mdp, "q")
    return np.where(mdp.legal_mask, bellman_optimal_backup(q, mdp) - q, 0.0)


def _successors(mdp: TabularMdp, s: int) -> List[int]:
    if s in mdp.terminal_states:
        return []
    reach = mdp.transition[s, mdp.legal_mask[s]].sum(axis=0)
    return [int(t) for t in np.flatnonzero(reach > 0.0) if t not in mdp.terminal_states]


def topological_order(mdp: TabularMdp) -> Tuple[int, ...]:
    """
    States ordered so every successor precedes its predecessors.

    Raises:
        UnsupportedMdpError: If the reachability graph has a cycle
    """
    graph = {s: _successors(mdp, s) for s in range(mdp.n_states)}
    try:
        return tuple(TopologicalSorter(graph).static_order())
    except CycleError as e:
        raise UnsupportedMdpError(
            f"reachability graph has a cycle through states {e.args[1]}"
        ) from e


def is_acyclic(mdp: TabularMdp) -> bool:
    try:
        topological_order(mdp)
    except UnsupportedMdpError:
        return False
    return True


def _backward_induction(mdp: TabularMdp) -> QTable:
    q = mdp.zeros()
    values = np.zeros(mdp.n_states)
    for s in topological_order(mdp):
        n = mdp.n_actions_per_state[s]
        if n == 0:
            continue
        q[s, :n] = mdp.reward[s, :n] + mdp.gamma * (mdp.transition[s, :n] @ values)
        values[s] = q[s, :n].max()
    return q


def solve_q_star(mdp: TabularMdp, tol: float = 1e-10, max_iterations: int = 1_000_000) -> QTable:
    """
    Compute the optimal Q table.

    gamma < 1 uses value iteration until ||B*Q - Q||_inf <= tol. gamma = 1
    is accepted only for acyclic (hence episodic) MDPs and solved exactly by
    backward induction.

    Raises:
        UnsupportedMdpError: gamma = 1 on an MDP whose reachability graph has cycles
    """
    if mdp.gamma >= 1.0:
        q = _backward_induction(mdp)
        logger.debug(f"Q* by backward induction over {mdp.n_states} states")
        return q

    q = mdp.zeros()
    for iteration in range(max_iterations):
        backup = bellman_optimal_backup(q, mdp)
        residual = float(np.max(np.abs(backup - q), initial=0.0))
        if residual <= tol:
            logger.debug(f"Value iteration converged after {iteration} sweeps (residual {residual:.2e})")
            return q
        q = backup
    raise UnsupportedMdpError(f"value iteration did not reach tol={tol} in {max_iterations} sweeps")


def policy_transition_matrix(mdp: TabularMdp, pi: PolicyTable) -> NDArray[np.float64]:
    """State-to-state matrix P_pi(s, s') = sum_a pi(a|s) P(s'|s,a)."""
    return np.einsum("sa,sat->st", pi, mdp.transition)


def apply_policy_operator(table: np.ndarray, mdp: TabularMdp, pi: PolicyTable) -> NDArray[np.float64]:
    """(P^pi x)(s,a) = sum_s' P(s'|s,a) sum_a' pi(a'|s') x(s',a')."""
    next_values = (pi * table).sum(axis=1)
    return np.where(mdp.legal_mask, mdp.transition @ next_values, 0.0)


def solve_linear_system(matrix: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    condition = float(np.linalg.cond(matrix))
    if not math.isfinite(condition) or condition > MAX_CONDITION_NUMBER:
        raise SingularSystemError(f"{what} system is singular or ill-conditioned", condition)
    try:
        return scipy.linalg.solve(matrix, rhs)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise SingularSystemError(f"{what} system could not be solved: {e}", condition) from e


def discounted_occupancy(mdp: TabularMdp, pi: PolicyTable, gamma_d: float = 0.99) -> DistributionTable:
    """
    Discounted state-action occupancy d^pi(s,a).

    Solves the flow system (I - gamma_d P_pi^T) d_s = (1 - gamma_d) rho_0 and
    sets d(s,a) = d_s(s) pi(a|s). Mass entering a terminal state leaves the
    system, so the result is renormalized to total mass 1.

    Raises:
        ValueError: If gamma_d is outside (0, 1)
        SingularSystemError: If the flow system cannot be solved reliably
    """
    if not 0.0 < gamma_d < 1.0:
        raise ValueError(f"gamma_d must lie in (0, 1), got {gamma_d}")
    pi = check_policy(pi, mdp)
    flow = np.eye(mdp.n_states) - gamma_d * policy_transition_matrix(mdp, pi).T
    d_states = solve_linear_system(flow, (1.0 - gamma_d) * mdp.initial_distribution, "occupancy")
    d = np.clip(d_states, 0.0, None)[:, None] * pi
    total = d.sum()
    if total <= 0.0:
        raise SingularSystemError("occupancy has no mass on non-terminal states", 1.0)
    return d / total


def recurring_probability(
    mdp: TabularMdp,
    pi: PolicyTable,
    horizon: Optional[int] = None,
    gamma: Optional[float] = None,
) -> float:
    """
    Recurring probability eps_pi = sup_{s,a} sum_{t>=1} gamma^t rho(s,a,t).

    rho(s,a,t) is the probability of leaving s with action a and coming back
    to s for the first time at step t. The sum is accumulated by dynamic
    programming on the taboo chain that tracks "not yet returned to s"; one
    sweep extends the horizon by one step.

    Args:
        horizon: Steps to accumulate. Defaults to the horizon at which
            gamma^t < 1e-12 (10_000 sweeps for gamma = 1)
        gamma: Discount, defaults to mdp.gamma
    """
    pi = check_policy(pi, mdp)
    gamma = mdp.gamma if gamma is None else gamma
    if horizon is None:
        horizon = 10_000 if gamma >= 1.0 else math.ceil(math.log(1e-12) / math.log(gamma))

    chain = policy_transition_matrix(mdp, pi)
    # first_hit[x, s]: discounted probability of reaching s from x (x != s) for the first time
    first_hit = np.zeros((mdp.n_states, mdp.n_states))
    for _ in range(horizon):
        taboo = first_hit.copy()
        np.fill_diagonal(taboo, 0.0)
        updated = gamma * (chain + chain @ taboo)
        change = float(np.max(np.abs(updated - first_hit), initial=0.0))
        first_hit = updated
        if change < 1e-15:
            break

    taboo = first_hit.copy()
    np.fill_diagonal(taboo, 0.0)
    states = np.arange(mdp.n_states)
    direct = mdp.transition[states, :, states]
    via_others = np.einsum("sat,ts->sa", mdp.transition, taboo)
    returns = gamma * (direct + via_others)
    legal = returns[mdp.legal_mask]
    if legal.size == 0:
        return 0.0
    return float(np.clip(legal.max(), 0.0, 1.0))


def policy_q_values(mdp: TabularMdp, pi: PolicyTable) -> Tuple[QTable, NDArray[np.float64]]:
    """
    Exact Q^pi and V^pi by dense linear solve.

    Raises:
        UnsupportedMdpError: gamma = 1 on a cyclic MDP
        SingularSystemError: If the evaluation system is singular
    """
    pi = check_policy(pi, mdp)
    if mdp.gamma >= 1.0:
        topological_order(mdp)
    reward_pi = (pi * mdp.reward).sum(axis=1)
    system = np.eye(mdp.n_states) - mdp.gamma * policy_transition_matrix(mdp, pi)
    values = solve_linear_system(system, reward_pi, "policy evaluation")
    q = mdp.reward + mdp.gamma * (mdp.transition @ values)
    return np.where(mdp.legal_mask, q, 0.0), values


def expected_return(mdp: TabularMdp, pi: PolicyTable) -> float:
    """eta(pi) = E_{s ~ rho_0}[V^pi(s)]."""
    _, values = policy_q_values(mdp, pi)
    return float(mdp.initial_distribution @ values)


def optimal_return(mdp: TabularMdp, q_star: Optional[QTable] = None) -> float:
    q_star = solve_q_star(mdp) if q_star is None else q_star
    return float(mdp.initial_distribution @ state_values(q_star, mdp))


def regret(mdp: TabularMdp, pi: PolicyTable, q_star: Optional[QTable] = None) -> float:
    """Regret(pi) = eta(pi*) - eta(pi)."""
    return optimal_return(mdp, q_star) - expected_return(mdp, pi)


def suboptimality_constant(q_star: QTable, mdp: TabularMdp) -> float:
    """c = max_{s,a} (Q*(s,a*) - Q*(s,a)) over legal entries."""
    gaps = state_values(q_star, mdp)[:, None] - q_star
    legal = gaps[mdp.legal_mask]
    return float(legal.max()) if legal.size else 0.0
