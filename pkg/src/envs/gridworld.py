"""
Gridworld MDPs from plain-text layouts

Layouts are rectangular character grids: ``#`` wall, ``.`` floor, ``S`` the
single start cell, ``G`` the single goal cell. Every non-wall cell becomes a
state; the goal is terminal. Four deterministic actions (up, right, down,
left); bumping into a wall or the grid edge leaves the agent in place.
Entering the goal pays ``goal_reward``, every other step pays
``step_reward``.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
from loguru import logger

from ..mdp import TabularMdp

LAYOUTS_DIR = Path(__file__).parent / "layouts"
BUNDLED_LAYOUTS = {
    "four_rooms": LAYOUTS_DIR / "four_rooms.txt",
    "maze": LAYOUTS_DIR / "maze.txt",
}

ACTION_NAMES = ("up", "right", "down", "left")
MOVES = ((-1, 0), (0, 1), (1, 0), (0, -1))
VALID_CHARACTERS = frozenset("#.SG")

Cell = Tuple[int, int]


class LayoutParseError(ValueError):
    """Exception for malformed grid layouts, located by 1-based row/column."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[int] = None):
        location = f" (row {row}, column {column})" if row is not None else ""
        super().__init__(f"{message}{location}")
        self.row = row
        self.column = column


@dataclass(frozen=True)
class GridLayout:
    """
    Parsed gridworld layout.

    Attributes:
        name: Layout name (bundled name or file stem)
        rows: Raw layout rows
        cells: Non-wall cells in row-major order; index = state id
        start: Start cell
        goal: Goal cell
    """
    name: str
    rows: Tuple[str, ...]
    cells: Tuple[Cell, ...]
    start: Cell
    goal: Cell

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])

    def is_wall(self, cell: Cell) -> bool:
        r, c = cell
        if not (0 <= r < self.height and 0 <= c < self.width):
            return True
        return self.rows[r][c] == "#"

    def state_index(self) -> Dict[Cell, int]:
        return {cell: i for i, cell in enumerate(self.cells)}


def parse_layout(text: str, name: str = "custom") -> GridLayout:
    """
    Parse a layout string.

    Raises:
        LayoutParseError: Empty or ragged grid, unknown characters, or not
            exactly one start and one goal
    """
    rows = tuple(line.rstrip("\r") for line in text.strip("\n").split("\n"))
    if not rows or not rows[0]:
        raise LayoutParseError(f"layout '{name}' is empty")

    width = len(rows[0])
    start: Optional[Cell] = None
    goal: Optional[Cell] = None
    cells = []

    for r, row in enumerate(rows):
        if len(row) != width:
            raise LayoutParseError(
                f"layout '{name}' is not rectangular: row has {len(row)} cells, expected {width}",
                row=r + 1, column=min(len(row), width) + 1,
            )
        for c, char in enumerate(row):
            if char not in VALID_CHARACTERS:
                raise LayoutParseError(f"unknown character {char!r}", row=r + 1, column=c + 1)
            if char == "#":
                continue
            if char == "S":
                if start is not None:
                    raise LayoutParseError("second start cell", row=r + 1, column=c + 1)
                start = (r, c)
            elif char == "G":
                if goal is not None:
                    raise LayoutParseError("second goal cell", row=r + 1, column=c + 1)
                goal = (r, c)
            cells.append((r, c))

    if start is None:
        raise LayoutParseError(f"layout '{name}' has no start cell 'S'")
    if goal is None:
        raise LayoutParseError(f"layout '{name}' has no goal cell 'G'")

    return GridLayout(name=name, rows=rows, cells=tuple(cells), start=start, goal=goal)


def load_layout(name_or_path: Union[str, Path]) -> GridLayout:
    """Load a bundled layout by name ('four_rooms', 'maze') or a layout file by path."""
    key = str(name_or_path).lower().replace("-", "_")
    path = BUNDLED_LAYOUTS.get(key, Path(name_or_path))
    if not path.exists():
        raise LayoutParseError(
            f"unknown layout '{name_or_path}'; bundled layouts: {', '.join(sorted(BUNDLED_LAYOUTS))}"
        )
    name = key if key in BUNDLED_LAYOUTS else path.stem
    return parse_layout(path.read_text(encoding="utf-8"), name=name)


def build_gridworld(
    layout: Union[GridLayout, str],
    gamma: float = 0.99,
    goal_reward: float = 1.0,
    step_reward: float = 0.0,
) -> TabularMdp:
    """
    Build the navigation MDP for a layout.

    Args:
        layout: Parsed layout, bundled layout name, or path to a layout file
        gamma: Discount factor
        goal_reward: Reward for the transition entering the goal
        step_reward: Reward for every other transition
    """
    if not isinstance(layout, GridLayout):
        layout = load_layout(layout)

    index = layout.state_index()
    n_states = len(layout.cells)
    goal = index[layout.goal]
    n_actions = len(MOVES)

    transition = np.zeros((n_states, n_actions, n_states))
    reward = np.zeros((n_states, n_actions))
    for cell, s in index.items():
        if s == goal:
            continue
        for a, (dr, dc) in enumerate(MOVES):
            target = (cell[0] + dr, cell[1] + dc)
            s_next = s if layout.is_wall(target) else index[target]
            transition[s, a, s_next] = 1.0
            reward[s, a] = goal_reward if s_next == goal else step_reward

    initial = np.zeros(n_states)
    initial[index[layout.start]] = 1.0

    logger.debug(f"Gridworld '{layout.name}': {n_states} states, {layout.height}x{layout.width} grid")
    return TabularMdp(
        n_actions_per_state=tuple(0 if s == goal else n_actions for s in range(n_states)),
        transition=transition,
        reward=reward,
        terminal_states=frozenset({goal}),
        gamma=gamma,
        initial_distribution=initial,
        state_labels=tuple(f"({r},{c})" for r, c in layout.cells),
    )
