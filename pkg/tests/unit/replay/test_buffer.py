"""
Unit tests for the replay buffer, its fast/slow views and the weighted update.

Author: ReplayLab Team
Python: >=3.9
Framework: pytest
"""

import csv

import numpy as np
import pytest

from src.envs import Transition
from src.replay import (
    CSV_COLUMNS,
    EmptyBufferError,
    FastSlowBuffers,
    ReplayBuffer,
    WeightContractError,
    apply_weighted_update,
    weighted_squared_errors,
)


def make_transition(s, a, trajectory_id=0, step_index=0, r=0.0, distance=None, censored=False):
    return Transition(
        s=s, a=a, r=r, s_next=s, done=False, trajectory_id=trajectory_id,
        step_index=step_index, distance_to_end=distance, censored=censored,
    )


@pytest.fixture
def buffer():
    return ReplayBuffer(capacity=4, table_shape=(3, 2), h_record_length=3, priority_floor=0.0)


class TestReplayBuffer:
    """Tests for storage, statistics and sampling."""

    def test_fifo_eviction_updates_counts(self, buffer):
        """The fifth push evicts the first transition and its count."""
        for i in range(5):
            buffer.push(make_transition(i % 3, 0, distance=0))
        assert len(buffer) == 4
        counts = buffer.counts()
        assert counts[0, 0] == 1
        assert counts[1, 0] == 2
        assert counts[2, 0] == 1
        np.testing.assert_allclose(buffer.mu(), buffer.empirical_histogram())
        assert buffer.mu().sum() == pytest.approx(1.0)

    def test_empty_buffer(self, buffer, rng):
        """Sampling an empty buffer raises; mu is all zero."""
        assert buffer.mu().sum() == 0.0
        with pytest.raises(EmptyBufferError):
            buffer.sample(2, rng)

    def test_episode_end_backfills_h_records(self, buffer):
        """Distances are filled at episode end and recorded per (s, a)."""
        for step in range(3):
            buffer.push(make_transition(step, 1, trajectory_id=4, step_index=step))
        assert buffer.h_records() == {}
        buffer.on_episode_end(4)
        records = buffer.h_records()
        assert records[(0, 1)] == ((2, False),)
        assert records[(2, 1)] == ((0, False),)
        assert buffer.transition_at(0).distance_to_end == 2

    def test_censored_h_records(self, buffer):
        buffer.push(make_transition(0, 0, trajectory_id=1))
        buffer.on_episode_end(1, censored=True)
        snapshot = buffer.snapshot()
        assert snapshot.h_values(0, 0) == ()
        assert snapshot.h_values(0, 0, include_censored=True) == (0,)

    def test_h_record_length_is_bounded(self, buffer):
        """Only the newest h_record_length values are kept."""
        for d in range(5):
            buffer.push(make_transition(0, 0, distance=d))
        assert [h for h, _ in buffer.h_records()[(0, 0)]] == [2, 3, 4]

    def test_snapshot_is_read_only(self, buffer):
        buffer.push(make_transition(0, 0, distance=0))
        snapshot = buffer.snapshot()
        with pytest.raises(ValueError):
            snapshot.mu[0, 0] = 0.5
        assert snapshot.size == 1

    def test_uniform_without_priorities(self, buffer, rng):
        """Freshly pushed transitions share one priority."""
        for i in range(4):
            buffer.push(make_transition(i % 3, 0, distance=0))
        batch = buffer.sample(8, rng)
        np.testing.assert_allclose(batch.probabilities, 0.25)
        assert len(batch) == 8

    def test_set_priorities_shifts_sampling(self, buffer, rng):
        """A zero-priority slot is never drawn."""
        for i in range(4):
            buffer.push(make_transition(i % 3, 0, distance=0))
        buffer.set_priorities([0, 1, 2, 3], [0.0, 1.0, 1.0, 2.0])
        drawn = np.concatenate([buffer.sample(16, rng).indices for _ in range(50)])
        assert 0 not in drawn
        assert buffer.tree[3] == 2.0

    def test_priority_floor_added(self, rng):
        buffer = ReplayBuffer(capacity=2, table_shape=(1, 1), priority_floor=0.5)
        buffer.push(make_transition(0, 0, distance=0))
        buffer.set_priorities([0], [0.0])
        assert buffer.tree[0] == 0.5

    def test_set_priority_on_empty_slot(self, buffer):
        with pytest.raises(IndexError):
            buffer.set_priorities([2], [1.0])

    def test_dump_csv(self, buffer, tmp_path):
        """Rows come out oldest first under the fixed header."""
        for i in range(5):
            buffer.push(make_transition(i % 3, 1, step_index=i, r=0.5, distance=0))
        path = buffer.dump_csv(tmp_path / "buffer.csv")
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert [row[CSV_COLUMNS.index("step_index")] for row in rows[1:]] == ["1", "2", "3", "4"]

    def test_capacity_must_be_positive(self):
        with pytest.raises(ValueError):
            ReplayBuffer(capacity=0, table_shape=(1, 1))


class TestFastSlowBuffers:
    """Tests for the fast/slow views."""

    def test_fast_view_holds_newest(self):
        """With fraction 0.25 of capacity 8 the fast view is the two newest records."""
        buffer = ReplayBuffer(capacity=8, table_shape=(8, 1))
        for s in range(8):
            buffer.push(make_transition(s, 0, distance=0))
        views = FastSlowBuffers(buffer, fraction=0.25, seed=0)
        with pytest.raises(EmptyBufferError):
            views.sample_fast(4)
        views.refresh()
        states, actions = views.sample_fast(200)
        assert set(states.tolist()) == {6, 7}
        assert set(actions.tolist()) == {0}
        slow_states, _ = views.sample_slow(400)
        assert set(slow_states.tolist()) == set(range(8))

    def test_fast_view_tracks_filled_slots(self):
        """The fast share is taken of the stored transitions, not of the capacity."""
        buffer = ReplayBuffer(capacity=100, table_shape=(8, 1))
        for s in range(8):
            buffer.push(make_transition(s, 0, distance=0))
        views = FastSlowBuffers(buffer, fraction=0.25, seed=0)
        views.refresh()
        assert views.fast_size == 2
        states, _ = views.sample_fast(200)
        assert set(states.tolist()) == {6, 7}

    def test_refresh_on_empty_buffer(self):
        views = FastSlowBuffers(ReplayBuffer(capacity=10, table_shape=(1, 1)), fraction=0.5)
        views.refresh()
        assert views.fast_size == 0

    def test_fraction_range(self, buffer):
        with pytest.raises(ValueError):
            FastSlowBuffers(buffer, fraction=0.0)


class TestWeightedUpdate:
    """Tests for apply_weighted_update and weighted_squared_errors."""

    def test_zero_weight_is_no_op(self):
        q = np.zeros((2, 2))
        apply_weighted_update(q, np.array([0]), np.array([1]), np.array([5.0]), np.array([0.0]), lr=0.5)
        assert q[0, 1] == 0.0

    def test_step_is_lr_times_weight(self):
        """lr * w above 1 overshoots the target; max_step caps the step."""
        q = np.zeros((1, 2))
        apply_weighted_update(q, np.array([0]), np.array([0]), np.array([3.0]), np.array([10.0]), lr=0.5)
        assert q[0, 0] == pytest.approx(15.0)
        apply_weighted_update(q, np.array([0]), np.array([1]), np.array([3.0]), np.array([10.0]), lr=0.5, max_step=1.0)
        assert q[0, 1] == pytest.approx(3.0)

    def test_small_steps_unaffected_by_cap(self):
        q = np.zeros((1, 1))
        apply_weighted_update(q, np.array([0]), np.array([0]), np.array([2.0]), np.array([1.5]), lr=0.2, max_step=1.0)
        assert q[0, 0] == pytest.approx(0.6)

    def test_sequential_in_batch_order(self):
        """Repeated pairs see the value left by the previous sample."""
        q = np.zeros((1, 1))
        apply_weighted_update(q, np.array([0, 0]), np.array([0, 0]), np.array([1.0, 1.0]), np.ones(2), lr=0.5)
        assert q[0, 0] == pytest.approx(0.75)

    @pytest.mark.parametrize("weights", [np.array([-0.1]), np.array([np.nan])])
    def test_rejects_bad_weights(self, weights):
        with pytest.raises(WeightContractError):
            apply_weighted_update(np.zeros((1, 1)), np.array([0]), np.array([0]), np.array([1.0]), weights, lr=0.1)

    def test_weighted_squared_errors(self):
        q = np.array([[1.0, 2.0]])
        losses = weighted_squared_errors(q, np.array([0, 0]), np.array([0, 1]), np.array([3.0, 2.0]), np.array([0.5, 4.0]))
        np.testing.assert_allclose(losses, [2.0, 0.0])


class TestSamplingWeightingEquivalence:
    """Proportional sampling and uniform sampling with importance weights agree in expectation."""

    def test_expected_update_matches(self, rng):
        """E_p[g] equals E_uniform[w g] with w = N p / sum(p), within 3 sigma."""
        capacity = 6
        buffer = ReplayBuffer(capacity=capacity, table_shape=(capacity, 1), priority_floor=0.0)
        for s in range(capacity):
            buffer.push(make_transition(s, 0, distance=0))
        priorities = np.array([1.0, 2.0, 3.0, 1.0, 5.0, 0.5])
        buffer.set_priorities(range(capacity), priorities)
        g = np.array([3.0, -1.0, 2.0, 0.0, 1.5, -4.0])

        prioritized = np.concatenate([g[buffer.sample(100, rng).indices] for _ in range(200)])
        weights = capacity * priorities / priorities.sum()
        uniform_slots = rng.integers(capacity, size=prioritized.size)
        weighted = weights[uniform_slots] * g[uniform_slots]

        exact = float(np.dot(priorities / priorities.sum(), g))
        sigma_p = prioritized.std(ddof=1) / np.sqrt(prioritized.size)
        sigma_w = weighted.std(ddof=1) / np.sqrt(weighted.size)
        assert abs(prioritized.mean() - exact) <= 3.0 * sigma_p + 1e-12
        assert abs(weighted.mean() - exact) <= 3.0 * sigma_w
