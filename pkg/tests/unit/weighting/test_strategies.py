"""
Unit tests for the replay weighting strategies.

Author: ReplayLab Team
Python: >=3.9
Framework: pytest
"""

import numpy as np
import pytest
from pydantic import ValidationError

from src.estimators import TceConfig, tce_raw
from src.replay import WeightContractError
from src.weighting import (
    RatioSource,
    StrategyKind,
    WeightInputs,
    WeightingConfigurationError,
    WeightingStrategy,
    compute_weights,
    exact_ratio,
    normalize_batch,
    weight_entropy,
)


def random_inputs(rng, n):
    return WeightInputs(
        td_errors=rng.standard_normal(n) * 3.0,
        discor_penalty=rng.uniform(0.0, 50.0, n),
        tau=float(rng.uniform(0.01, 2.0)),
        ratio=rng.exponential(1.0, n) * (rng.uniform(size=n) > 0.1),
        tce_values=rng.uniform(0.0, 30.0, n),
        q_gap=rng.uniform(0.0, 800.0, n),
        policy_probs=rng.uniform(0.0, 1.0, n),
        hindsight_errors=rng.standard_normal(n),
    )


class TestFeasibility:
    """Every strategy returns nonnegative weights with batch mean 1."""

    @pytest.mark.parametrize("kind", list(StrategyKind))
    def test_weights_feasible(self, kind, rng):
        strategy = WeightingStrategy(kind=kind)
        for _ in range(1000):
            n = int(rng.integers(1, 65))
            batch = compute_weights(strategy, random_inputs(rng, n), n)
            assert batch.weights.shape == (n,)
            assert np.all(batch.weights >= 0.0)
            assert batch.weights.mean() == pytest.approx(1.0, abs=1e-9)

    def test_uniform_is_all_ones(self):
        batch = compute_weights(WeightingStrategy(), WeightInputs(), 5)
        np.testing.assert_array_equal(batch.weights, np.ones(5))

    def test_large_penalties_do_not_underflow(self):
        """Scores are shifted by their maximum, so huge penalties keep their ordering."""
        strategy = WeightingStrategy(kind=StrategyKind.DISCOR, tau=1.0)
        batch = compute_weights(strategy, WeightInputs(discor_penalty=np.array([1000.0, 1001.0])), 2)
        assert batch.weights[0] > batch.weights[1] > 0.0
        assert not batch.degraded

    def test_all_zero_scores_degrade_to_uniform(self):
        strategy = WeightingStrategy(kind=StrategyKind.ORACLE, ratio_source=RatioSource.EXACT)
        inputs = WeightInputs(ratio=np.zeros(3), q_gap=np.zeros(3))
        batch = compute_weights(strategy, inputs, 3)
        assert batch.degraded
        np.testing.assert_array_equal(batch.weights, np.ones(3))


class TestStrategyInputs:
    """Missing inputs and configuration errors."""

    @pytest.mark.parametrize("kind, missing", [
        (StrategyKind.PER, "td_errors"),
        (StrategyKind.DISCOR, "discor_penalty"),
        (StrategyKind.REMERN, "ratio"),
        (StrategyKind.REMERT, "tce_values"),
        (StrategyKind.ORACLE, "q_gap"),
        (StrategyKind.FULL_THEOREM, "hindsight_errors"),
    ])
    def test_missing_input(self, kind, missing, rng):
        inputs = random_inputs(rng, 4)
        inputs = WeightInputs(**{**inputs.__dict__, missing: None})
        with pytest.raises(WeightingConfigurationError, match=missing):
            compute_weights(WeightingStrategy(kind=kind), inputs, 4)

    def test_ratio_dropped_with_source_none(self):
        """remert without a ratio source needs only the TCE values."""
        strategy = WeightingStrategy(kind=StrategyKind.REMERT, ratio_source=RatioSource.NONE)
        assert not strategy.uses_ratio
        assert strategy.label == "remert-noratio"
        batch = compute_weights(strategy, WeightInputs(tce_values=np.array([0.0, 1.0])), 2)
        assert batch.weights[0] / batch.weights[1] == pytest.approx(np.e)

    def test_negative_ratio(self):
        strategy = WeightingStrategy(kind=StrategyKind.REMERT)
        with pytest.raises(WeightContractError):
            compute_weights(strategy, WeightInputs(ratio=np.array([-1.0]), tce_values=np.zeros(1)), 1)

    def test_shape_mismatch(self):
        strategy = WeightingStrategy(kind=StrategyKind.PER)
        with pytest.raises(WeightingConfigurationError):
            compute_weights(strategy, WeightInputs(td_errors=np.ones(3)), 4)

    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            WeightingStrategy(kind="nope")

    def test_needs_oracle(self):
        assert WeightingStrategy(kind=StrategyKind.ORACLE, ratio_source=RatioSource.NONE).needs_oracle
        assert WeightingStrategy(kind=StrategyKind.REMERT, ratio_source=RatioSource.EXACT).needs_oracle
        assert not WeightingStrategy(kind=StrategyKind.REMERT, ratio_source=RatioSource.LFIW).needs_oracle
        assert WeightingStrategy(kind=StrategyKind.REMERN).uses_delta


class TestStrategyValues:
    """Per-kind score formulas."""

    def test_per_scores(self):
        strategy = WeightingStrategy(kind=StrategyKind.PER, per_alpha=1.0, priority_floor=0.0)
        batch = compute_weights(strategy, WeightInputs(td_errors=np.array([-1.0, 3.0])), 2)
        np.testing.assert_allclose(batch.weights, [0.5, 1.5])

    def test_discor_uses_running_tau(self):
        strategy = WeightingStrategy(kind=StrategyKind.DISCOR)
        inputs = WeightInputs(discor_penalty=np.array([0.0, 2.0]), tau=2.0)
        batch = compute_weights(strategy, inputs, 2)
        assert batch.weights[0] / batch.weights[1] == pytest.approx(np.e)

    def test_remern_with_unit_ratio_is_discor(self, rng):
        """A ratio of 1 everywhere leaves exactly the DisCor weights."""
        for _ in range(50):
            n = int(rng.integers(1, 33))
            inputs = WeightInputs(
                discor_penalty=rng.uniform(0.0, 5.0, n), tau=float(rng.uniform(0.1, 2.0)), ratio=np.ones(n),
            )
            remern = compute_weights(WeightingStrategy(kind=StrategyKind.REMERN), inputs, n)
            discor = compute_weights(WeightingStrategy(kind=StrategyKind.DISCOR), inputs, n)
            np.testing.assert_allclose(remern.weights, discor.weights, rtol=1e-12)

    def test_remern_with_zero_penalty_is_uniform(self):
        inputs = WeightInputs(discor_penalty=np.zeros(4), tau=1.0, ratio=np.ones(4))
        batch = compute_weights(WeightingStrategy(kind=StrategyKind.REMERN), inputs, 4)
        np.testing.assert_allclose(batch.weights, 1.0)

    def test_full_theorem_factors(self):
        """ratio * (2 - pi) * exp(-gap) * |hindsight|."""
        inputs = WeightInputs(
            ratio=np.array([1.0, 2.0]),
            q_gap=np.array([0.0, 0.0]),
            policy_probs=np.array([1.0, 0.0]),
            hindsight_errors=np.array([1.0, -0.5]),
        )
        with_factor = compute_weights(WeightingStrategy(kind=StrategyKind.FULL_THEOREM), inputs, 2)
        np.testing.assert_allclose(with_factor.scores, [0.5, 1.0])
        without = compute_weights(WeightingStrategy(kind=StrategyKind.FULL_THEOREM, policy_factor=False), inputs, 2)
        np.testing.assert_allclose(without.weights, [1.0, 1.0])

    def test_remert_prefers_samples_near_the_end(self):
        """With wide clip bounds a shorter distance to the end gets a larger weight."""
        cfg = TceConfig(gamma=0.99, c=1.0, b1_start=0.0, b1_end=0.0, b2_start=1e6, b2_end=1e6)
        strategy = WeightingStrategy(kind=StrategyKind.REMERT, ratio_source=RatioSource.NONE, tce=cfg)
        tce_values = tce_raw(np.array([0, 1, 5, 20]), cfg, 0.2)
        weights = compute_weights(strategy, WeightInputs(tce_values=tce_values), 4).weights
        assert np.all(np.diff(weights) < 0.0)


class TestHelpers:
    """Tests for normalize_batch, exact_ratio and weight_entropy."""

    def test_normalize_batch(self):
        np.testing.assert_allclose(normalize_batch([1.0, 3.0]), [0.5, 1.5])
        np.testing.assert_array_equal(normalize_batch([0.0, 0.0]), [1.0, 1.0])
        assert normalize_batch([]).size == 0
        with pytest.raises(WeightContractError):
            normalize_batch([1.0, np.inf])

    def test_exact_ratio_floor(self):
        """Unvisited pairs use mu = 1 / (2 * buffer size)."""
        occupancy = np.array([[0.5, 0.5]])
        mu = np.array([[1.0, 0.0]])
        ratio = exact_ratio(occupancy, mu, np.array([0, 0]), np.array([0, 1]), buffer_size=10)
        np.testing.assert_allclose(ratio, [0.5, 10.0])

    def test_weight_entropy(self):
        assert weight_entropy(np.ones(4)) == pytest.approx(np.log(4))
        assert weight_entropy(np.array([1.0, 0.0])) == pytest.approx(0.0)
        assert weight_entropy(np.zeros(3)) == 0.0
