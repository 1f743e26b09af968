"""
Episodic replay buffer

FIFO ring of Transition records with a sum tree of sampling priorities,
exact per-(s,a) visit counts (the buffer distribution mu) and a bounded
per-(s,a) record of observed distance-to-end values. Also hosts the
fast/slow views used for density-ratio estimation and the weighted
tabular update shared by every learner.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import csv
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Deque, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import settings
from ..envs.driver import Transition, backfill_distances
from .sum_tree import SumTree

PairKey = Tuple[int, int]
HRecord = Tuple[Tuple[int, bool], ...]

CSV_COLUMNS = (
    "slot", "s", "a", "r", "s_next", "done", "trajectory_id",
    "step_index", "distance_to_end", "censored", "priority",
)


class ReplayError(Exception):
    """Base exception for replay buffer errors."""
    pass


class EmptyBufferError(ReplayError):
    """Exception raised when sampling from a buffer with no transitions."""
    pass


class WeightContractError(ValueError):
    """Exception raised when a per-sample weight is negative or not finite."""
    pass


@dataclass(frozen=True)
class BufferSnapshot:
    """
    Immutable view of the buffer's statistics.

    Attributes:
        mu: Empirical buffer distribution over (s, a)
        counts: Visit counts over (s, a)
        h_records: (distance, censored) pairs per (s, a), oldest first
        size: Number of stored transitions
    """
    mu: NDArray[np.float64]
    counts: NDArray[np.int64]
    h_records: Mapping[PairKey, HRecord]
    size: int

    def h_values(self, s: int, a: int, include_censored: bool = False) -> Tuple[int, ...]:
        record = self.h_records.get((s, a), ())
        return tuple(h for h, censored in record if include_censored or not censored)


@dataclass(frozen=True)
class SampledBatch:
    """
    Transitions drawn from the buffer.

    Attributes:
        indices: Buffer slots of the drawn transitions
        transitions: The drawn records
        priorities: Their leaf priorities at sampling time
        probabilities: Sampling probability of each slot (priority / total)
    """
    indices: NDArray[np.int64]
    transitions: Tuple[Transition, ...]
    priorities: NDArray[np.float64]
    probabilities: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.transitions)

    @cached_property
    def states(self) -> NDArray[np.int64]:
        return np.array([t.s for t in self.transitions], dtype=np.int64)

    @cached_property
    def actions(self) -> NDArray[np.int64]:
        return np.array([t.a for t in self.transitions], dtype=np.int64)

    @cached_property
    def rewards(self) -> NDArray[np.float64]:
        return np.array([t.r for t in self.transitions], dtype=np.float64)

    @cached_property
    def next_states(self) -> NDArray[np.int64]:
        return np.array([t.s_next for t in self.transitions], dtype=np.int64)

    @cached_property
    def dones(self) -> NDArray[np.bool_]:
        return np.array([t.done for t in self.transitions], dtype=bool)


class ReplayBuffer:
    """
    Fixed-capacity FIFO replay buffer over a tabular MDP.

    New transitions enter with the largest priority seen so far, so with no
    set_priorities calls sampling is uniform over stored transitions.
    """

    def __init__(
        self,
        capacity: int,
        table_shape: Tuple[int, int],
        h_record_length: Optional[int] = None,
        priority_floor: Optional[float] = None,
    ):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self.table_shape = table_shape
        self.h_record_length = h_record_length or settings.h_record_length
        self.priority_floor = settings.priority_floor if priority_floor is None else priority_floor

        self._storage: List[Optional[Transition]] = [None] * capacity
        self._next_slot = 0
        self._size = 0
        self._tree = SumTree(capacity)
        self._max_priority = 1.0
        self._counts = np.zeros(table_shape, dtype=np.int64)
        self._h_records: Dict[PairKey, Deque[Tuple[int, bool]]] = {}
        self._open_episodes: Dict[int, List[int]] = {}
        self._h_cache: Optional[Mapping[PairKey, HRecord]] = None

    def __len__(self) -> int:
        return self._size

    @property
    def tree(self) -> SumTree:
        return self._tree

    def push(self, transition: Transition) -> int:
        """Store a transition, evicting the oldest one at capacity. Returns its slot."""
        slot = self._next_slot
        evicted = self._storage[slot]
        if evicted is not None:
            self._counts[evicted.s, evicted.a] -= 1
            pending = self._open_episodes.get(evicted.trajectory_id)
            if pending and pending[0] == slot:
                pending.pop(0)

        self._storage[slot] = transition
        self._counts[transition.s, transition.a] += 1
        self._tree.update(slot, self._max_priority)
        self._next_slot = (slot + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

        if transition.distance_to_end is None:
            self._open_episodes.setdefault(transition.trajectory_id, []).append(slot)
        else:
            self._record_h(transition)
        return slot

    def on_episode_end(self, trajectory_id: int, censored: bool = False):
        """
        Backfill distance-to-end for the stored transitions of a finished
        trajectory and append the values to the per-(s,a) h-records.
        """
        slots = self._open_episodes.pop(trajectory_id, [])
        pending = [self._storage[slot] for slot in slots]
        filled = backfill_distances(pending, censored=censored)
        for slot, transition in zip(slots, filled):
            self._storage[slot] = transition
            self._record_h(transition)
        if censored:
            logger.debug(f"Trajectory {trajectory_id}: {len(filled)} censored distances recorded")

    def _record_h(self, transition: Transition):
        key = (transition.s, transition.a)
        record = self._h_records.get(key)
        if record is None:
            record = self._h_records[key] = deque(maxlen=self.h_record_length)
        record.append((transition.distance_to_end, transition.censored))
        self._h_cache = None

    def sample(self, batch_size: int, rng: np.random.Generator) -> SampledBatch:
        """
        Stratified proportional sampling of ``batch_size`` transitions.

        Raises:
            EmptyBufferError: If the buffer holds no transitions
        """
        if self._size == 0:
            raise EmptyBufferError("cannot sample from an empty replay buffer")
        indices = self._tree.stratified_sample(batch_size, rng)
        total = self._tree.total
        priorities = self._tree.nodes[indices + self.capacity - 1].copy()
        return SampledBatch(
            indices=indices,
            transitions=tuple(self._storage[i] for i in indices),
            priorities=priorities,
            probabilities=priorities / total,
        )

    def set_priorities(self, indices: Sequence[int], priorities: Sequence[float]):
        """Overwrite leaf priorities; the floor is added before insertion."""
        for index, priority in zip(indices, priorities):
            if self._storage[int(index)] is None:
                raise IndexError(f"slot {index} holds no transition")
            value = float(priority) + self.priority_floor
            self._tree.update(int(index), value)
            self._max_priority = max(self._max_priority, value)

    def mu(self) -> NDArray[np.float64]:
        if self._size == 0:
            return np.zeros(self.table_shape)
        return self._counts / float(self._size)

    def counts(self) -> NDArray[np.int64]:
        return self._counts.copy()

    def empirical_histogram(self) -> NDArray[np.float64]:
        """Exact recount of mu from the stored transitions."""
        histogram = np.zeros(self.table_shape)
        for transition in self._storage:
            if transition is not None:
                histogram[transition.s, transition.a] += 1.0
        return histogram / max(self._size, 1)

    def h_records(self) -> Mapping[PairKey, HRecord]:
        if self._h_cache is None:
            self._h_cache = MappingProxyType(
                {key: tuple(record) for key, record in self._h_records.items()}
            )
        return self._h_cache

    def snapshot(self) -> BufferSnapshot:
        mu = self.mu()
        counts = self._counts.copy()
        mu.setflags(write=False)
        counts.setflags(write=False)
        return BufferSnapshot(mu=mu, counts=counts, h_records=self.h_records(), size=self._size)

    def newest_slots(self, n: int) -> NDArray[np.int64]:
        """Slots of the ``n`` most recently pushed transitions, newest last."""
        n = min(n, self._size)
        return (self._next_slot - n + np.arange(n)) % self.capacity

    def transition_at(self, slot: int) -> Transition:
        transition = self._storage[slot]
        if transition is None:
            raise IndexError(f"slot {slot} holds no transition")
        return transition

    def dump_csv(self, path: Path) -> Path:
        """Write stored transitions, oldest first, one per row."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for slot in self.newest_slots(self._size):
                t = self._storage[slot]
                writer.writerow([
                    int(slot), t.s, t.a, format(t.r, ".12g"), t.s_next, int(t.done),
                    t.trajectory_id, t.step_index,
                    "" if t.distance_to_end is None else t.distance_to_end,
                    int(t.censored), format(self._tree[int(slot)], ".12g"),
                ])
        logger.info(f"Replay buffer dumped: {path} ({self._size} transitions)")
        return path


class FastSlowBuffers:
    """
    Fast and slow views of one replay buffer for density-ratio estimation.

    D_s is the whole buffer; D_f is the newest ``fraction`` of the filled
    slots, frozen at each refresh (once per episode). The two views draw from
    independent random streams.
    """

    def __init__(self, buffer: ReplayBuffer, fraction: Optional[float] = None, seed: int = 0):
        fraction = settings.fast_buffer_fraction if fraction is None else fraction
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"fast buffer fraction must lie in (0, 1], got {fraction}")
        self.buffer = buffer
        self.fraction = fraction
        fast_seq, slow_seq = np.random.SeedSequence(seed).spawn(2)
        self._fast_rng = np.random.default_rng(fast_seq)
        self._slow_rng = np.random.default_rng(slow_seq)
        self._fast_slots = np.zeros(0, dtype=np.int64)

    def refresh(self):
        if len(self.buffer) == 0:
            self._fast_slots = np.zeros(0, dtype=np.int64)
            return
        n = max(1, int(round(self.fraction * len(self.buffer))))
        self._fast_slots = self.buffer.newest_slots(n)

    @property
    def fast_size(self) -> int:
        return len(self._fast_slots)

    def _pairs(self, slots: NDArray[np.int64]) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
        transitions = [self.buffer.transition_at(int(slot)) for slot in slots]
        return (
            np.array([t.s for t in transitions], dtype=np.int64),
            np.array([t.a for t in transitions], dtype=np.int64),
        )

    def sample_fast(self, batch_size: int) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
        if self.fast_size == 0:
            raise EmptyBufferError("fast buffer is empty; call refresh() after the first episode")
        return self._pairs(self._fast_rng.choice(self._fast_slots, size=batch_size))

    def sample_slow(self, batch_size: int) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
        if len(self.buffer) == 0:
            raise EmptyBufferError("slow buffer is empty")
        slots = self.buffer.newest_slots(len(self.buffer))
        return self._pairs(self._slow_rng.choice(slots, size=batch_size))


def _check_weights(weights: np.ndarray) -> NDArray[np.float64]:
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(~np.isfinite(weights)) or np.any(weights < 0.0):
        raise WeightContractError("per-sample weights must be finite and >= 0")
    return weights


def weighted_squared_errors(
    q: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
) -> NDArray[np.float64]:
    """Per-sample w * (y - Q(s,a))^2."""
    weights = _check_weights(weights)
    errors = np.asarray(targets, dtype=np.float64) - q[states, actions]
    return weights * errors ** 2


def apply_weighted_update(
    q: np.ndarray,
    states: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    lr: float,
    max_step: Optional[float] = None,
) -> np.ndarray:
    """
    In-place tabular update Q(s,a) += lr*w * (y - Q(s,a)), one sample at a
    time in batch order. ``max_step`` caps lr*w when given. Returns ``q``.

    Raises:
        WeightContractError: If any weight is negative or not finite
    """
    weights = _check_weights(weights)
    steps = lr * weights
    if max_step is not None:
        steps = np.minimum(steps, max_step)
    for s, a, y, step in zip(states, actions, targets, steps):
        q[s, a] += step * (y - q[s, a])
    return q
