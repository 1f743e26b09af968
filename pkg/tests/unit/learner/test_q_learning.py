"""
Unit tests for episodic weighted Q-learning.

Author: ReplayLab Team
Python: >=3.9
Framework: pytest
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.envs import EpisodeDriver
from src.learner import LearnerConfig, SamplingMode, weighted_q_learning
from src.mdp import discounted_occupancy, softmax_policy, solve_q_star
from src.replay import ReplayBuffer
from src.weighting import RatioSource, StrategyKind, WeightingStrategy, exact_ratio


def small_config(**overrides) -> LearnerConfig:
    values = dict(
        lr=0.5,
        total_steps=1000,
        batch_size=8,
        buffer_capacity=500,
        target_update_interval=10,
        checkpoint_interval=250,
        max_episode_steps=50,
        seed=1,
    )
    values.update(overrides)
    return LearnerConfig(**values)


def train(mdp, strategy, cfg, q_star=None, **kwargs):
    driver = EpisodeDriver(mdp, seed=cfg.seed, max_episode_steps=cfg.max_episode_steps)
    buffer = ReplayBuffer(cfg.buffer_capacity, mdp.table_shape)
    return weighted_q_learning(driver, buffer, strategy, cfg, q_star=q_star, **kwargs), buffer


class TestLearnerConfig:
    """Tests for LearnerConfig validation and the exploration schedule."""

    def test_epsilon_schedule(self):
        cfg = LearnerConfig(total_steps=100, epsilon_start=1.0, epsilon_end=0.0, epsilon_anneal_fraction=0.5)
        assert cfg.epsilon(0) == 1.0
        assert cfg.epsilon(25) == pytest.approx(0.5)
        assert cfg.epsilon(50) == 0.0
        assert cfg.epsilon(99) == 0.0

    def test_batch_larger_than_buffer(self):
        with pytest.raises(ValidationError):
            LearnerConfig(batch_size=64, buffer_capacity=32)

    def test_max_step_positive(self):
        assert LearnerConfig().max_step is None
        with pytest.raises(ValidationError):
            LearnerConfig(max_step=0.0)

    def test_unknown_field(self):
        with pytest.raises(ValidationError):
            LearnerConfig(learning_rate=0.1)


class TestWeightedQLearning:
    """Tests for the training loop."""

    def test_corridor_converges(self, corridor_mdp):
        """Q(start, right) reaches gamma * 1 on the deterministic corridor."""
        q_star = solve_q_star(corridor_mdp)
        trace, _ = train(corridor_mdp, WeightingStrategy(), small_config(total_steps=3000), q_star)
        assert trace.q[0, 1] == pytest.approx(0.9, abs=1e-3)
        assert trace.records[-1].regret == pytest.approx(0.0, abs=1e-9)

    def test_checkpoints_and_warmup(self, corridor_mdp):
        trace, _ = train(corridor_mdp, WeightingStrategy(), small_config())
        assert [r.iteration for r in trace.records] == [0, 250, 500, 750, 1000]
        assert trace.warmup_skips == 7
        assert trace.updates == 1000 - 7
        assert np.isnan(trace.records[-1].q_gap_linf)

    def test_same_seed_same_result(self, corridor_mdp):
        q_star = solve_q_star(corridor_mdp)
        a, _ = train(corridor_mdp, WeightingStrategy(kind=StrategyKind.PER), small_config(lr=0.1), q_star)
        b, _ = train(corridor_mdp, WeightingStrategy(kind=StrategyKind.PER), small_config(lr=0.1), q_star)
        np.testing.assert_array_equal(a.q, b.q)
        assert a.records == b.records
        assert a.episode_returns == b.episode_returns

    def test_uniform_is_plain_q_learning(self, corridor_mdp):
        """Unit weights replay textbook Q-learning on the same batches, update for update."""
        cfg = small_config(total_steps=300, target_update_interval=5)
        batches = []
        trace, _ = train(
            corridor_mdp, WeightingStrategy(), cfg,
            on_batch=lambda batch, weighted, inputs: batches.append((batch, weighted.weights.copy())),
        )
        mask = corridor_mdp.legal_mask
        q = corridor_mdp.zeros()
        q_target = q.copy()
        for update, (batch, weights) in enumerate(batches, start=1):
            np.testing.assert_array_equal(weights, 1.0)
            for t in batch.transitions:
                bootstrap = 0.0 if t.done else float(np.max(q_target[t.s_next][mask[t.s_next]]))
                q[t.s, t.a] += cfg.lr * (t.r + corridor_mdp.gamma * bootstrap - q[t.s, t.a])
            if update % cfg.target_update_interval == 0:
                q_target = q.copy()
        assert len(batches) == trace.updates
        np.testing.assert_allclose(trace.q, q, atol=1e-12)

    def test_exact_ratio_follows_current_policy(self, corridor_mdp):
        """Every batch uses the occupancy of the softmax policy of the current table."""
        cfg = small_config(total_steps=150, target_update_interval=1000, lr=0.1)
        live, checked = {}, []
        driver = EpisodeDriver(corridor_mdp, seed=cfg.seed, max_episode_steps=cfg.max_episode_steps)
        buffer = ReplayBuffer(cfg.buffer_capacity, corridor_mdp.table_shape)

        def check(batch, weighted, inputs):
            pi = softmax_policy(live["q"], corridor_mdp)
            occupancy = discounted_occupancy(corridor_mdp, pi, cfg.gamma_d)
            expected = exact_ratio(occupancy, buffer.mu(), batch.states, batch.actions, len(buffer))
            np.testing.assert_allclose(inputs.ratio, expected, rtol=1e-12)
            checked.append(live["q"].copy())

        trace = weighted_q_learning(
            driver, buffer, WeightingStrategy(kind=StrategyKind.REMERN, ratio_source=RatioSource.EXACT), cfg,
            on_checkpoint=lambda step, q, buf: live.setdefault("q", q),
            on_batch=check,
        )
        assert len(checked) == trace.updates
        assert not np.allclose(checked[0], checked[-1])

    def test_callbacks(self, corridor_mdp):
        checkpoints, episodes, batches = [], [], []
        trace, buffer = train(
            corridor_mdp,
            WeightingStrategy(),
            small_config(total_steps=200, checkpoint_interval=100),
            on_checkpoint=lambda step, q, buf: checkpoints.append((step, buf is not None)),
            on_episode_end=lambda tid, ret, censored: episodes.append((tid, censored)),
            on_batch=lambda batch, weights, inputs: batches.append(len(batch)),
        )
        assert checkpoints == [(0, True), (100, True), (200, True)]
        assert len(episodes) == len(trace.episode_returns)
        assert [tid for tid, _ in episodes] == list(range(len(episodes)))
        assert len(batches) == trace.updates
        assert set(batches) == {8}
        assert len(buffer) == 200

    def test_censored_episodes_reported(self, cycle_mdp):
        """The ring never terminates, so every finished episode is cut by the step limit."""
        episodes = []
        train(
            cycle_mdp,
            WeightingStrategy(),
            small_config(total_steps=120, max_episode_steps=20),
            on_episode_end=lambda tid, ret, censored: episodes.append(censored),
        )
        assert episodes == [True] * 6

    def test_prioritized_mode_sets_priorities(self, corridor_mdp):
        """Prioritized sampling writes the strategy scores into the sum tree."""
        cfg = small_config(total_steps=300, sampling_mode=SamplingMode.PRIORITIZED)
        trace, buffer = train(corridor_mdp, WeightingStrategy(kind=StrategyKind.PER), cfg)
        leaves = buffer.tree.leaves()[: len(buffer)]
        assert len(set(np.round(leaves, 12))) > 1
        assert trace.updates == 300 - 7

    @pytest.mark.parametrize("kind, source", [
        (StrategyKind.DISCOR, RatioSource.EXACT),
        (StrategyKind.REMERN, RatioSource.LFIW),
        (StrategyKind.REMERT, RatioSource.LFIW),
        (StrategyKind.REMERT, RatioSource.NONE),
        (StrategyKind.ORACLE, RatioSource.EXACT),
        (StrategyKind.FULL_THEOREM, RatioSource.EXACT),
    ])
    def test_every_strategy_trains(self, corridor_mdp, kind, source):
        """Each strategy runs end to end and keeps the Q table finite."""
        q_star = solve_q_star(corridor_mdp)
        strategy = WeightingStrategy(kind=kind, ratio_source=source)
        trace, _ = train(corridor_mdp, strategy, small_config(total_steps=400, lr=0.1), q_star)
        assert np.all(np.isfinite(trace.q))
        assert all(np.isfinite(r.mean_weight_entropy) for r in trace.records)
        assert trace.updates == 400 - 7
