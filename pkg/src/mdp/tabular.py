"""
Tabular MDP model for ReplayLab

Finite state/action MDP container plus the table conventions used by every
other module. Q tables, policies and state-action distributions are plain
``numpy`` arrays of shape ``(n_states, max_actions)``; entries for illegal
actions (and every entry of a terminal state) are kept at zero.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

from dataclasses import dataclass, field
from typing import FrozenSet, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

QTable = NDArray[np.float64]
PolicyTable = NDArray[np.float64]
DistributionTable = NDArray[np.float64]

STOCHASTIC_TOLERANCE = 1e-12


class MdpError(Exception):
    """Base exception for MDP machinery errors."""
    pass


class MdpStructureError(MdpError):
    """Exception for malformed MDPs or tables shaped for another MDP."""
    pass


class UnsupportedMdpError(MdpError):
    """Exception for MDPs outside the solvable class (gamma = 1 with cycles)."""
    pass


class SingularSystemError(MdpError):
    """Exception for linear flow systems that cannot be solved reliably."""

    def __init__(self, message: str, condition_number: float):
        super().__init__(f"{message} (condition number {condition_number:.3e})")
        self.condition_number = condition_number


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """
    Finite Markov decision process.

    Attributes:
        n_actions_per_state: Legal action count per state; terminal states have 0
        transition: P(s'|s,a), shape (n_states, max_actions, n_states)
        reward: r(s,a), shape (n_states, max_actions)
        terminal_states: States that end an episode
        gamma: Discount factor in (0, 1]
        initial_distribution: rho_0 over states
        state_labels: Optional human-readable state names
    """
    n_actions_per_state: Tuple[int, ...]
    transition: NDArray[np.float64]
    reward: NDArray[np.float64]
    terminal_states: FrozenSet[int]
    gamma: float
    initial_distribution: NDArray[np.float64]
    state_labels: Optional[Tuple[str, ...]] = None
    legal_mask: NDArray[np.bool_] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n_actions = tuple(int(n) for n in self.n_actions_per_state)
        object.__setattr__(self, "n_actions_per_state", n_actions)
        object.__setattr__(self, "terminal_states", frozenset(self.terminal_states))

        transition = np.array(self.transition, dtype=np.float64)
        reward = np.array(self.reward, dtype=np.float64)
        rho0 = np.array(self.initial_distribution, dtype=np.float64)
        n_states = len(n_actions)
        max_actions = max(max(n_actions, default=0), 1)

        if transition.shape != (n_states, max_actions, n_states):
            raise MdpStructureError(
                f"transition has shape {transition.shape}, "
                f"expected {(n_states, max_actions, n_states)}"
            )
        if reward.shape != (n_states, max_actions):
            raise MdpStructureError(
                f"reward has shape {reward.shape}, expected {(n_states, max_actions)}"
            )
        if rho0.shape != (n_states,):
            raise MdpStructureError(
                f"initial distribution has shape {rho0.shape}, expected {(n_states,)}"
            )
        if not 0.0 < self.gamma <= 1.0:
            raise MdpStructureError(f"gamma must lie in (0, 1], got {self.gamma}")

        mask = np.arange(max_actions)[None, :] < np.asarray(n_actions)[:, None]
        for s in range(n_states):
            if s in self.terminal_states and n_actions[s] != 0:
                raise MdpStructureError(f"terminal state {s} declares {n_actions[s]} actions")
            if s not in self.terminal_states and n_actions[s] == 0:
                raise MdpStructureError(f"non-terminal state {s} has no legal action")

        if not np.all(np.isfinite(reward)):
            raise MdpStructureError("rewards must be finite")
        if np.any(transition < 0.0):
            raise MdpStructureError("transition probabilities must be nonnegative")
        if np.any(transition[~mask] != 0.0) or np.any(reward[~mask] != 0.0):
            raise MdpStructureError("illegal actions must carry zero transition mass and reward")

        row_sums = transition.sum(axis=2)
        bad = mask & (np.abs(row_sums - 1.0) > STOCHASTIC_TOLERANCE)
        if np.any(bad):
            s, a = np.argwhere(bad)[0]
            raise MdpStructureError(
                f"P(.|s={s}, a={a}) sums to {row_sums[s, a]!r}, expected 1"
            )
        if np.any(rho0 < 0.0) or abs(rho0.sum() - 1.0) > 1e-9:
            raise MdpStructureError("initial distribution must be a probability vector")
        if self.state_labels is not None and len(self.state_labels) != n_states:
            raise MdpStructureError("state_labels length does not match n_states")

        for name, value in (("transition", transition), ("reward", reward),
                            ("initial_distribution", rho0)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        mask.setflags(write=False)
        object.__setattr__(self, "legal_mask", mask)

    @property
    def n_states(self) -> int:
        return len(self.n_actions_per_state)

    @property
    def max_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def table_shape(self) -> Tuple[int, int]:
        return (self.n_states, self.max_actions)

    @property
    def n_legal(self) -> int:
        return int(self.legal_mask.sum())

    @property
    def nonterminal_mask(self) -> NDArray[np.bool_]:
        return self.legal_mask.any(axis=1)

    def label(self, s: int) -> str:
        if self.state_labels is None:
            return f"s{s}"
        return self.state_labels[s]

    def legal_pairs(self) -> NDArray[np.int64]:
        """(s, a) index pairs of every legal entry, in row-major order."""
        return np.argwhere(self.legal_mask)

    def zeros(self) -> NDArray[np.float64]:
        return np.zeros(self.table_shape, dtype=np.float64)

    def with_gamma(self, gamma: float) -> "TabularMdp":
        return TabularMdp(
            n_actions_per_state=self.n_actions_per_state,
            transition=self.transition,
            reward=self.reward,
            terminal_states=self.terminal_states,
            gamma=gamma,
            initial_distribution=self.initial_distribution,
            state_labels=self.state_labels,
        )


def check_table(table: np.ndarray, mdp: TabularMdp, name: str = "table") -> NDArray[np.float64]:
    """
    Validate that a table is shaped for ``mdp`` and finite.

    Raises:
        MdpStructureError: On shape mismatch or non-finite entries
    """
    array = np.asarray(table, dtype=np.float64)
    if array.shape != mdp.table_shape:
        raise MdpStructureError(
            f"{name} has shape {array.shape}, MDP expects {mdp.table_shape}"
        )
    if not np.all(np.isfinite(array[mdp.legal_mask])):
        raise MdpStructureError(f"{name} has non-finite entries")
    return array
