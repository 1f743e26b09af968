"""
Five-state chain MDP

s0 -> s1 -> s2 -> s3 -> sT. At s0..s2 the agent either goes "left" straight
to the terminal state for +2 or "right" to the next state for +1. s3 has a
single action reaching sT for +2, so the all-right policy collects 5 while
any early exit collects at most 4.
"""

import numpy as np

from ..mdp import TabularMdp

LEFT = 0
RIGHT = 1
TERMINAL = 4
CHAIN_LABELS = ("s0", "s1", "s2", "s3", "sT")


def build_chain_mdp(gamma: float = 1.0) -> TabularMdp:
    n_states = len(CHAIN_LABELS)
    transition = np.zeros((n_states, 2, n_states))
    reward = np.zeros((n_states, 2))

    for s in range(3):
        transition[s, LEFT, TERMINAL] = 1.0
        reward[s, LEFT] = 2.0
        transition[s, RIGHT, s + 1] = 1.0
        reward[s, RIGHT] = 1.0

    transition[3, 0, TERMINAL] = 1.0
    reward[3, 0] = 2.0

    initial = np.zeros(n_states)
    initial[0] = 1.0

    return TabularMdp(
        n_actions_per_state=(2, 2, 2, 1, 0),
        transition=transition,
        reward=reward,
        terminal_states=frozenset({TERMINAL}),
        gamma=gamma,
        initial_distribution=initial,
        state_labels=CHAIN_LABELS,
    )
