"""
Temporal correctness estimation

TCE turns the distance to the end of a trajectory into a surrogate for
|Q_k - Q*|: errors far from the end of an episode are built on more
bootstrapped, not yet corrected, targets.

    TCE(h) = f(h) (L + c) + gamma^(h+1) c,   f(h) = (gamma - gamma^(h+1)) / (1 - gamma)

with f(h) = h when gamma = 1. L is the running mean absolute Bellman error
and c the suboptimality constant. Outputs are clipped into [b1, b2], with
both bounds moving linearly over training.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import csv
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import settings
from ..mdp import (
    PolicyTable,
    QTable,
    TabularMdp,
    bellman_optimal_backup,
    check_policy,
    greedy_actions,
    policy_transition_matrix,
    suboptimality_constant,
    solve_linear_system,
    topological_order,
)

ArrayLike = Union[int, float, np.ndarray, Sequence[int]]


class TceConfig(BaseModel):
    """
    TCE hyperparameters.

    Attributes:
        gamma: Discount used inside f and gamma^(h+1)
        c: Suboptimality constant in reward units
        b1_start, b1_end: Lower clip bound at the start / end of training
        b2_start, b2_end: Upper clip bound at the start / end of training
        include_censored: Use distances from timeout-cut episodes
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(0.99, gt=0.0, le=1.0)
    c: float = Field(1.0, ge=0.0)
    b1_start: float = 0.4
    b1_end: float = 0.9
    b2_start: float = 1.6
    b2_end: float = 1.1
    include_censored: bool = False

    @model_validator(mode="after")
    def _check_bounds(self) -> "TceConfig":
        if self.b1_start > self.b2_start or self.b1_end > self.b2_end:
            raise ValueError("clip bounds need b1 <= b2 at both ends of the schedule")
        return self

    def bounds(self, progress: float = 0.0) -> Tuple[float, float]:
        """(b1, b2) at training progress in [0, 1]."""
        p = min(max(progress, 0.0), 1.0)
        b1 = self.b1_start + p * (self.b1_end - self.b1_start)
        b2 = self.b2_start + p * (self.b2_end - self.b2_start)
        return b1, b2

    def midpoint(self, progress: float = 0.0) -> float:
        b1, b2 = self.bounds(progress)
        return 0.5 * (b1 + b2)


def horizon_factor(h: ArrayLike, gamma: float) -> np.ndarray:
    """f(h) = (gamma - gamma^(h+1)) / (1 - gamma); h itself when gamma = 1."""
    h = np.asarray(h, dtype=np.float64)
    if gamma >= 1.0:
        return h
    return (gamma - gamma ** (h + 1.0)) / (1.0 - gamma)


def tce_raw(h: ArrayLike, cfg: TceConfig, l_value: float) -> Union[float, np.ndarray]:
    """Unclipped TCE; scalar in, scalar out."""
    h_array = np.asarray(h, dtype=np.float64)
    if np.any(h_array < 0):
        raise ValueError("distance to end must be >= 0")
    value = horizon_factor(h_array, cfg.gamma) * (l_value + cfg.c) + cfg.gamma ** (h_array + 1.0) * cfg.c
    return float(value) if value.ndim == 0 else value


def tce(h: ArrayLike, cfg: TceConfig, l_value: float, progress: float = 0.0) -> Union[float, np.ndarray]:
    b1, b2 = cfg.bounds(progress)
    value = np.clip(tce_raw(h, cfg, l_value), b1, b2)
    return float(value) if np.ndim(value) == 0 else value


def expected_tce(
    record: Sequence[int],
    cfg: TceConfig,
    l_value: float,
    progress: float = 0.0,
) -> float:
    """
    Mean raw TCE over a window of recorded distances, clipped afterwards.
    An empty record yields the clip midpoint.
    """
    if len(record) == 0:
        return cfg.midpoint(progress)
    b1, b2 = cfg.bounds(progress)
    mean = float(np.mean(tce_raw(np.asarray(record), cfg, l_value)))
    return float(np.clip(mean, b1, b2))


def expected_tce_exact(
    mdp: TabularMdp,
    pi: PolicyTable,
    cfg: TceConfig,
    l_value: float,
    progress: float = 0.0,
) -> NDArray[np.float64]:
    """
    E_tau[TCE] for every (s,a) from the exact distribution of h under pi.

    TCE is affine in gamma^h (gamma < 1) or in h (gamma = 1), so only
    E[gamma^h] or E[h] is needed; both come from one linear solve over
    states. Trajectories that never terminate contribute gamma^h = 0.
    """
    pi = check_policy(pi, mdp)
    gamma = cfg.gamma
    terminal = np.zeros(mdp.n_states)
    terminal[list(mdp.terminal_states)] = 1.0
    to_terminal = mdp.transition @ terminal
    chain = policy_transition_matrix(mdp, pi)
    pi_to_terminal = (pi * to_terminal).sum(axis=1)
    system = np.eye(mdp.n_states) - gamma * chain

    if gamma < 1.0:
        # u(s) = E[gamma^h] for the transition taken at s
        u = solve_linear_system(system, pi_to_terminal, "distance-to-end")
        moment = to_terminal + gamma * (mdp.transition @ u)
        value = (l_value + cfg.c) * gamma * (1.0 - moment) / (1.0 - gamma) + gamma * cfg.c * moment
    else:
        # m(s) = E[h] for the transition taken at s
        nonterminal = 1.0 - terminal
        m = solve_linear_system(system, chain @ nonterminal, "distance-to-end")
        mean_h = mdp.transition @ (nonterminal * (1.0 + m))
        value = mean_h * (l_value + cfg.c) + cfg.c

    b1, b2 = cfg.bounds(progress)
    return np.where(mdp.legal_mask, np.clip(value, b1, b2), 0.0)


class BellmanErrorTracker:
    """
    Exponential moving average L of batch-mean |TD error|.

    The first observation initialises the average. The same statistic is
    the divisor tau applied to the DisCor penalty.
    """

    def __init__(self, rate: Optional[float] = None):
        self.rate = settings.error_tracker_rate if rate is None else rate
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate must lie in (0, 1], got {self.rate}")
        self._value: Optional[float] = None
        self.updates = 0

    @property
    def initialized(self) -> bool:
        return self._value is not None

    @property
    def value(self) -> float:
        return 0.0 if self._value is None else self._value

    def update(self, abs_td_errors: np.ndarray) -> float:
        observation = float(np.mean(np.abs(abs_td_errors)))
        if self._value is None:
            self._value = observation
        else:
            self._value += self.rate * (observation - self._value)
        self.updates += 1
        return self._value


def oracle_q_gap(q: QTable, q_star: QTable) -> NDArray[np.float64]:
    """Entrywise |q - q*|."""
    q = np.asarray(q, dtype=np.float64)
    q_star = np.asarray(q_star, dtype=np.float64)
    if q.shape != q_star.shape:
        raise ValueError(f"tables differ in shape: {q.shape} vs {q_star.shape}")
    return np.abs(q - q_star)


def cumulative_error_bound(
    q_k: QTable,
    q_prev: QTable,
    q_star: QTable,
    mdp: TabularMdp,
    c: Optional[float] = None,
) -> NDArray[np.float64]:
    """
    Upper bound on |Q_k - Q*| from the cumulative Bellman error of Q_{k-1}.

    bound(s,a) = |Q_k - B*Q_{k-1}|(s,a) + G(s,a) where G accumulates, along
    trajectories that act greedily with respect to Q_{k-1},
    gamma * (|Q_{k-1} - B*Q_{k-1}| + c) per non-terminal step and gamma * c
    on reaching a terminal state. Evaluated exactly by backward induction.

    Raises:
        UnsupportedMdpError: If the MDP has cycles
    """
    c = suboptimality_constant(q_star, mdp) if c is None else c
    hindsight = np.abs(q_k - bellman_optimal_backup(q_prev, mdp))
    residual_prev = np.abs(q_prev - bellman_optimal_backup(q_prev, mdp))
    actions = greedy_actions(q_prev, mdp)

    # carried[s]: bound contribution of entering s, before discounting
    carried = np.zeros(mdp.n_states)
    accumulated = mdp.zeros()
    for s in topological_order(mdp):
        if s in mdp.terminal_states:
            carried[s] = c
            continue
        n = mdp.n_actions_per_state[s]
        accumulated[s, :n] = mdp.gamma * (mdp.transition[s, :n] @ carried)
        a_hat = actions[s]
        carried[s] = residual_prev[s, a_hat] + c + accumulated[s, a_hat]

    logger.debug(f"Cumulative error bound evaluated with c={c:.4g}")
    return np.where(mdp.legal_mask, hindsight + accumulated, 0.0)


def dump_table_csv(table: np.ndarray, mdp: TabularMdp, path: Path, column: str = "value") -> Path:
    """Write the legal entries of a (s, a) table as s,a,label,<column> rows."""

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["s", "a", "label", column])
        for s, a in mdp.legal_pairs():
            writer.writerow([int(s), int(a), mdp.label(int(s)), format(float(table[s, a]), ".12g")])
    logger.info(f"Table '{column}' written: {path}")
    return path
