"""
Array-backed sum tree for proportional sampling

A complete binary tree of 2*capacity-1 nodes stored in one numpy array, the
way a binary heap is laid out: node i has children 2i+1 and 2i+2, leaves
occupy the last ``capacity`` slots, and every internal node holds the sum of
its children. Updates and prefix-sum lookups are O(log capacity).
"""

import numpy as np
from numpy.typing import NDArray


class SumTree:
    """
    Sum tree over ``capacity`` nonnegative leaf priorities.

    Attributes:
        capacity: Number of leaves
        nodes: Flat node array; nodes[0] is the total priority
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.nodes = np.zeros(2 * capacity - 1, dtype=np.float64)

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    def _leaf(self, index: int) -> int:
        if not 0 <= index < self.capacity:
            raise IndexError(f"leaf {index} out of range for capacity {self.capacity}")
        return index + self.capacity - 1

    def __getitem__(self, index: int) -> float:
        return float(self.nodes[self._leaf(index)])

    def leaves(self) -> NDArray[np.float64]:
        return self.nodes[self.capacity - 1:].copy()

    def update(self, index: int, priority: float):
        """Set one leaf priority and recompute its ancestors from their children."""
        if not np.isfinite(priority) or priority < 0.0:
            raise ValueError(f"priority must be finite and >= 0, got {priority}")
        node = self._leaf(index)
        self.nodes[node] = priority
        while node > 0:
            node = (node - 1) // 2
            self.nodes[node] = self.nodes[2 * node + 1] + self.nodes[2 * node + 2]

    def find(self, cumsum: float) -> int:
        """
        Leaf index whose priority interval contains ``cumsum``.

        Zero-priority leaves are never returned while the total is positive.
        """
        cumsum = min(max(cumsum, 0.0), self.total)
        node = 0
        while 2 * node + 1 < len(self.nodes):
            left, right = 2 * node + 1, 2 * node + 2
            if cumsum < self.nodes[left] or self.nodes[right] <= 0.0:
                node = left
            else:
                cumsum -= self.nodes[left]
                node = right
        return node - (self.capacity - 1)

    def find_many(self, cumsums: NDArray[np.float64]) -> NDArray[np.int64]:
        """Vectorized ``find``: every descent takes the same branches."""
        cumsums = np.clip(np.asarray(cumsums, dtype=np.float64), 0.0, self.total)
        internal = self.capacity - 1
        node = np.zeros(cumsums.shape, dtype=np.int64)
        active = node < internal
        while active.any():
            left = 2 * node[active] + 1
            left_mass = self.nodes[left]
            go_left = (cumsums[active] < left_mass) | (self.nodes[left + 1] <= 0.0)
            cumsums[active] = np.where(go_left, cumsums[active], cumsums[active] - left_mass)
            node[active] = np.where(go_left, left, left + 1)
            active = node < internal
        return node - internal

    def stratified_sample(self, batch_size: int, rng: np.random.Generator) -> NDArray[np.int64]:
        """
        Split the total mass into ``batch_size`` equal segments and draw one
        leaf uniformly within each segment.
        """
        if self.total <= 0.0:
            raise ValueError("cannot sample from a tree with zero total priority")
        segment = self.total / batch_size
        draws = (np.arange(batch_size) + rng.random(batch_size)) * segment
        return self.find_many(draws)

    def max_leaf(self) -> float:
        return float(self.nodes[self.capacity - 1:].max())

    def __repr__(self) -> str:
        return f"SumTree(capacity={self.capacity}, total={self.total:.6g})"
