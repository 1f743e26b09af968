"""
Unit tests for the chain, gridworld, random and cyclic MDP builders.

Author: ReplayLab Team
Python: >=3.9
Framework: pytest
"""

from collections import deque

import numpy as np
import pytest

from src.envs import (
    BUNDLED_LAYOUTS,
    CHAIN_LABELS,
    LayoutParseError,
    build_chain_mdp,
    build_cycle_mdp,
    build_gridworld,
    build_random_mdp,
    load_layout,
    parse_layout,
)
from src.envs.gridworld import MOVES
from src.mdp import is_acyclic, solve_q_star, state_values


def shortest_path_length(layout) -> int:
    """Breadth-first search from start to goal over floor cells."""
    frontier = deque([(layout.start, 0)])
    seen = {layout.start}
    while frontier:
        cell, distance = frontier.popleft()
        if cell == layout.goal:
            return distance
        for dr, dc in MOVES:
            target = (cell[0] + dr, cell[1] + dc)
            if not layout.is_wall(target) and target not in seen:
                seen.add(target)
                frontier.append((target, distance + 1))
    raise AssertionError("goal unreachable")


class TestChain:
    """Tests for the five-state chain."""

    def test_structure(self):
        """Labels, terminal state and action counts."""
        mdp = build_chain_mdp()
        assert mdp.state_labels == CHAIN_LABELS
        assert mdp.terminal_states == frozenset({4})
        assert mdp.n_actions_per_state == (2, 2, 2, 1, 0)
        assert mdp.gamma == 1.0
        assert is_acyclic(mdp)

    def test_rewards(self):
        """Left exits for +2, right advances for +1."""
        mdp = build_chain_mdp()
        np.testing.assert_array_equal(mdp.reward[:4], [[2, 1], [2, 1], [2, 1], [2, 0]])


class TestLayouts:
    """Tests for layout parsing and loading."""

    def test_parse_corridor(self):
        """Cells, start and goal of a small layout."""
        layout = parse_layout("#####\n#S.G#\n#####", "corridor")
        assert layout.cells == ((1, 1), (1, 2), (1, 3))
        assert layout.start == (1, 1)
        assert layout.goal == (1, 3)
        assert layout.height == 3 and layout.width == 5

    @pytest.mark.parametrize("text, row, column", [
        ("####\n#S.G#\n####", 2, 5),
        ("#####\n#S.X#\n#####", 2, 4),
        ("#####\n#SSG#\n#####", 2, 3),
        ("#####\n#S.GG\n#####", 2, 5),
    ])
    def test_parse_errors_carry_location(self, text, row, column):
        """Ragged rows, unknown characters and duplicate markers report row and column."""
        with pytest.raises(LayoutParseError) as info:
            parse_layout(text)
        assert info.value.row == row
        assert info.value.column == column

    @pytest.mark.parametrize("text", ["#####\n#..G#\n#####", "#####\n#S..#\n#####", ""])
    def test_missing_markers(self, text):
        """A layout needs exactly one start and one goal."""
        with pytest.raises(LayoutParseError):
            parse_layout(text)

    def test_layout_error_is_value_error(self):
        with pytest.raises(ValueError):
            parse_layout("#S#G#\n##")

    @pytest.mark.parametrize("name", sorted(BUNDLED_LAYOUTS))
    def test_bundled_layouts_load(self, name):
        """Bundled layouts parse and have a reachable goal."""
        layout = load_layout(name)
        assert layout.name == name
        assert shortest_path_length(layout) > 0

    def test_unknown_layout(self):
        with pytest.raises(LayoutParseError, match="bundled layouts"):
            load_layout("no_such_layout")


class TestGridworld:
    """Tests for build_gridworld."""

    def test_walls_keep_agent_in_place(self, corridor_mdp):
        """Moving up from the start bumps into a wall."""
        assert corridor_mdp.transition[0, 0, 0] == 1.0
        assert corridor_mdp.transition[0, 1, 1] == 1.0

    def test_goal_is_terminal(self, corridor_mdp):
        assert corridor_mdp.terminal_states == frozenset({2})
        assert corridor_mdp.n_actions_per_state == (4, 4, 0)
        assert corridor_mdp.reward[1, 1] == 1.0
        assert corridor_mdp.label(0) == "(1,1)"

    @pytest.mark.parametrize("name", ["four_rooms", "maze"])
    def test_optimal_value_matches_shortest_path(self, name):
        """V*(start) = gamma^(L-1) for a shortest path of L moves with reward only at the goal."""
        layout = load_layout(name)
        gamma = 0.95
        mdp = build_gridworld(layout, gamma=gamma)
        start = layout.state_index()[layout.start]
        value = state_values(solve_q_star(mdp), mdp)[start]
        assert value == pytest.approx(gamma ** (shortest_path_length(layout) - 1), abs=1e-8)

    def test_step_reward(self):
        """Every non-goal move pays step_reward."""
        mdp = build_gridworld(parse_layout("#####\n#S.G#\n#####"), step_reward=-0.1)
        assert mdp.reward[0, 1] == pytest.approx(-0.1)
        assert mdp.reward[1, 1] == pytest.approx(1.0)


class TestRandomAndCycle:
    """Tests for build_random_mdp and build_cycle_mdp."""

    def test_random_mdp_is_seeded(self):
        """Equal generators give equal MDPs."""
        a = build_random_mdp(5, 2, 0.9, np.random.default_rng(3))
        b = build_random_mdp(5, 2, 0.9, np.random.default_rng(3))
        np.testing.assert_array_equal(a.transition, b.transition)
        np.testing.assert_array_equal(a.reward, b.reward)

    def test_random_terminal_states(self):
        """The last n_terminal states are terminal and never start an episode."""
        mdp = build_random_mdp(6, 3, 1.0, np.random.default_rng(0), n_terminal=2)
        assert mdp.terminal_states == frozenset({4, 5})
        assert mdp.initial_distribution[4:].sum() == 0.0

    def test_random_variable_actions(self):
        mdp = build_random_mdp(8, 4, 0.9, np.random.default_rng(1), variable_actions=True)
        assert all(1 <= n <= 4 for n in mdp.n_actions_per_state)

    def test_random_gamma_one_needs_terminals(self):
        with pytest.raises(ValueError):
            build_random_mdp(4, 2, 1.0, np.random.default_rng(0))

    def test_cycle_structure(self):
        """Advance and retreat wrap around; completing a lap pays 1 - stay."""
        mdp = build_cycle_mdp(3, gamma=0.9, stay_probability=0.25)
        assert mdp.transition[2, 0, 0] == pytest.approx(0.75)
        assert mdp.transition[2, 0, 2] == pytest.approx(0.25)
        assert mdp.transition[0, 1, 2] == pytest.approx(0.75)
        assert mdp.reward[2, 0] == pytest.approx(0.75)
        assert mdp.reward[1, 1] == pytest.approx(0.75)
        assert not mdp.terminal_states

    def test_cycle_rejects_bad_stay(self):
        with pytest.raises(ValueError):
            build_cycle_mdp(3, stay_probability=1.0)
