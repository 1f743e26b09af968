"""Random and cyclic toy MDPs used by the property suites and recurrence checks."""

from typing import Optional

import numpy as np

from ..mdp import TabularMdp


def build_random_mdp(
    n_states: int,
    n_actions: int,
    gamma: float,
    rng: np.random.Generator,
    n_terminal: int = 0,
    variable_actions: bool = False,
    reward_scale: float = 1.0,
    concentration: float = 1.0,
) -> TabularMdp:
    """
    Dense random MDP.

    Transition rows are Dirichlet draws over all states, rewards are
    N(0, reward_scale^2). The last ``n_terminal`` states are terminal.
    With ``variable_actions`` each state draws its legal-action count from
    1..n_actions.
    """
    if gamma >= 1.0 and n_terminal == 0:
        raise ValueError("random MDPs with gamma = 1 need terminal states")
    if not 0 <= n_terminal < n_states:
        raise ValueError(f"n_terminal must lie in [0, {n_states}), got {n_terminal}")

    counts = []
    for s in range(n_states):
        if s >= n_states - n_terminal:
            counts.append(0)
        elif variable_actions:
            counts.append(int(rng.integers(1, n_actions + 1)))
        else:
            counts.append(n_actions)

    transition = np.zeros((n_states, n_actions, n_states))
    reward = np.zeros((n_states, n_actions))
    for s, count in enumerate(counts):
        if count:
            transition[s, :count] = rng.dirichlet(np.full(n_states, concentration), size=count)
            reward[s, :count] = reward_scale * rng.standard_normal(count)

    initial = np.zeros(n_states)
    initial[: n_states - n_terminal] = 1.0 / (n_states - n_terminal)

    return TabularMdp(
        n_actions_per_state=tuple(counts),
        transition=transition,
        reward=reward,
        terminal_states=frozenset(range(n_states - n_terminal, n_states)),
        gamma=gamma,
        initial_distribution=initial,
    )


def build_cycle_mdp(
    n_states: int = 3,
    gamma: float = 0.9,
    stay_probability: float = 0.0,
    start: Optional[int] = 0,
) -> TabularMdp:
    """
    Ring of ``n_states`` states with two actions.

    Action 0 advances to s+1 and action 1 retreats to s-1 (mod n_states);
    either one fails and leaves the agent in place with ``stay_probability``.
    Completing a lap at state 0 pays +1. No state is terminal.
    """
    if n_states < 2:
        raise ValueError("a cycle needs at least two states")
    if not 0.0 <= stay_probability < 1.0:
        raise ValueError(f"stay_probability must lie in [0, 1), got {stay_probability}")

    transition = np.zeros((n_states, 2, n_states))
    reward = np.zeros((n_states, 2))
    for s in range(n_states):
        for a, step in enumerate((1, -1)):
            s_next = (s + step) % n_states
            transition[s, a, s] += stay_probability
            transition[s, a, s_next] += 1.0 - stay_probability
            if s_next == 0:
                reward[s, a] = 1.0 - stay_probability

    initial = np.zeros(n_states)
    if start is None:
        initial[:] = 1.0 / n_states
    else:
        initial[start] = 1.0

    return TabularMdp(
        n_actions_per_state=(2,) * n_states,
        transition=transition,
        reward=reward,
        terminal_states=frozenset(),
        gamma=gamma,
        initial_distribution=initial,
    )
