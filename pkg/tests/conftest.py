"""Shared fixtures for the ReplayLab test suite."""

from pathlib import Path

import numpy as np
import pytest

from src.envs import build_chain_mdp, build_cycle_mdp, build_gridworld, build_random_mdp, parse_layout
from src.mdp import TabularMdp, solve_q_star

CHAIN_Q_STAR = np.array([
    [2.0, 5.0],
    [2.0, 4.0],
    [2.0, 3.0],
    [2.0, 0.0],
    [0.0, 0.0],
])

CORRIDOR_LAYOUT = """
#####
#S.G#
#####
"""


@pytest.fixture
def chain_mdp() -> TabularMdp:
    """The five-state chain MDP with gamma = 1."""
    return build_chain_mdp()


@pytest.fixture
def chain_q_star() -> np.ndarray:
    """Hand-derived Q* of the chain MDP."""
    return CHAIN_Q_STAR.copy()


@pytest.fixture
def cycle_mdp() -> TabularMdp:
    """Deterministic three-state ring with gamma = 0.9."""
    return build_cycle_mdp(3, gamma=0.9)


@pytest.fixture
def corridor_mdp() -> TabularMdp:
    """1x3 corridor S . G with a reward of 1 at the goal."""
    return build_gridworld(parse_layout(CORRIDOR_LAYOUT, "corridor"), gamma=0.9)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def random_mdp_factory():
    """Factory for seeded random MDPs."""

    def make(seed: int, n_states: int = 6, n_actions: int = 3, gamma: float = 0.9, **kwargs) -> TabularMdp:
        return build_random_mdp(n_states, n_actions, gamma, np.random.default_rng(seed), **kwargs)

    return make


@pytest.fixture
def solved_chain(chain_mdp):
    return chain_mdp, solve_q_star(chain_mdp)


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    path = tmp_path / "out"
    path.mkdir()
    return path
