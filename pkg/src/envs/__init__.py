"""Environments

Concrete MDP builders (chain, gridworlds, random and cyclic toys) and the
episodic driver that turns them into replay transitions.
"""

from .chain import build_chain_mdp, CHAIN_LABELS, LEFT, RIGHT
from .gridworld import (
    GridLayout,
    LayoutParseError,
    ACTION_NAMES,
    BUNDLED_LAYOUTS,
    parse_layout,
    load_layout,
    build_gridworld,
)
from .random_mdp import build_random_mdp, build_cycle_mdp
from .driver import Transition, EpisodeDriver, run_episode, backfill_distances

__all__ = [
    "build_chain_mdp",
    "CHAIN_LABELS",
    "LEFT",
    "RIGHT",
    "GridLayout",
    "LayoutParseError",
    "ACTION_NAMES",
    "BUNDLED_LAYOUTS",
    "parse_layout",
    "load_layout",
    "build_gridworld",
    "build_random_mdp",
    "build_cycle_mdp",
    "Transition",
    "EpisodeDriver",
    "run_episode",
    "backfill_distances",
]
