"""Tabular MDP Core

Exact finite-MDP machinery: the MDP container, Bellman operators, Q*,
policies, occupancy measures, recurring probability and regret.
"""

from .tabular import (
    TabularMdp,
    QTable,
    PolicyTable,
    DistributionTable,
    MdpError,
    MdpStructureError,
    UnsupportedMdpError,
    SingularSystemError,
    check_table,
)
from .solver import (
    bellman_optimal_backup,
    bellman_residual,
    state_values,
    greedy_actions,
    greedy_policy,
    uniform_policy,
    softmax_policy,
    check_policy,
    solve_q_star,
    topological_order,
    is_acyclic,
    policy_transition_matrix,
    apply_policy_operator,
    discounted_occupancy,
    recurring_probability,
    policy_q_values,
    expected_return,
    optimal_return,
    regret,
    suboptimality_constant,
    solve_linear_system,
)

__all__ = [
    "TabularMdp",
    "QTable",
    "PolicyTable",
    "DistributionTable",
    "MdpError",
    "MdpStructureError",
    "UnsupportedMdpError",
    "SingularSystemError",
    "check_table",
    "bellman_optimal_backup",
    "bellman_residual",
    "state_values",
    "greedy_actions",
    "greedy_policy",
    "uniform_policy",
    "softmax_policy",
    "check_policy",
    "solve_q_star",
    "topological_order",
    "is_acyclic",
    "policy_transition_matrix",
    "apply_policy_operator",
    "discounted_occupancy",
    "recurring_probability",
    "policy_q_values",
    "expected_return",
    "optimal_return",
    "regret",
    "suboptimality_constant",
    "solve_linear_system",
]
