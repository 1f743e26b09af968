"""
Unit tests for weighted value iteration on the chain MDP.

Author: ReplayLab Team
Python: >=3.9
Framework: pytest
"""

import numpy as np
import pytest

from src.learner import evaluate_q, weighted_backup_step, weighted_value_iteration
from src.mdp import solve_q_star
from src.weighting import RatioSource, StrategyKind, WeightingConfigurationError, WeightingStrategy


def run_chain(chain_mdp, chain_q_star, kind, iterations=100, **kwargs):
    return weighted_value_iteration(
        chain_mdp, WeightingStrategy(kind=kind, **kwargs), lr=0.1, iterations=iterations, q_star=chain_q_star,
    )


@pytest.fixture
def chain_traces(chain_mdp, chain_q_star):
    return {
        kind: run_chain(chain_mdp, chain_q_star, kind, iterations=300)
        for kind in (StrategyKind.UNIFORM, StrategyKind.PER, StrategyKind.DISCOR)
    }


class TestChainStudy:
    """Uniform, PER and DisCor on the five-state chain with lr = 0.1."""

    def test_uniform_first_sweep(self, chain_traces):
        """After one sweep the largest residual is the +2 exit: 2 - 0.2."""
        records = chain_traces[StrategyKind.UNIFORM].records
        assert records[0].iteration == 0
        assert records[1].td_error_linf == pytest.approx(1.8)

    def test_uniform_settles_at_sweep_13(self, chain_traces):
        assert chain_traces[StrategyKind.UNIFORM].iterations_to_optimal == 13

    def test_per_reduces_td_error_early(self, chain_traces):
        uniform = chain_traces[StrategyKind.UNIFORM].records
        per = chain_traces[StrategyKind.PER].records
        for k in (1, 2, 3):
            assert per[k].td_error_linf < uniform[k].td_error_linf

    def test_discor_reduces_q_gap_early(self, chain_traces):
        uniform = chain_traces[StrategyKind.UNIFORM].records
        discor = chain_traces[StrategyKind.DISCOR].records
        for k in (2, 3):
            assert discor[k].q_gap_l1 < uniform[k].q_gap_l1

    def test_per_shifts_weight_to_right_actions(self, chain_mdp, chain_q_star):
        """PER starts on the +2 exits and moves its weight to the right moves once their targets grow."""
        trace = weighted_value_iteration(
            chain_mdp, WeightingStrategy(kind=StrategyKind.PER), lr=0.1, iterations=6,
            q_star=chain_q_star, keep_tables=True,
        )
        first, sixth = trace.weights_history[0], trace.weights_history[5]
        for s in range(3):
            assert first[s, 0] > first[s, 1]
            assert sixth[s, 1] > sixth[s, 0]

    def test_per_settles_before_uniform(self, chain_traces):
        """Up-weighting the right moves lets them overtake the exits before sweep 13."""
        settled = chain_traces[StrategyKind.PER].iterations_to_optimal
        assert settled is not None and settled < 13

    def test_discor_settles_later_than_uniform(self, chain_traces):
        settled = chain_traces[StrategyKind.DISCOR].iterations_to_optimal
        assert settled is not None and settled > 13

    def test_all_converge(self, chain_traces, chain_q_star):
        """300 sweeps bring every strategy to an optimal greedy policy."""
        for trace in chain_traces.values():
            assert trace.records[-1].regret == pytest.approx(0.0, abs=1e-9)
            assert trace.iterations_to_optimal is not None


class TestWeightedValueIteration:
    """Options and contracts of weighted_value_iteration."""

    def test_lfiw_ratio_unavailable(self, chain_mdp, chain_q_star):
        with pytest.raises(WeightingConfigurationError):
            run_chain(chain_mdp, chain_q_star, StrategyKind.REMERN, iterations=2, ratio_source=RatioSource.LFIW)

    @pytest.mark.parametrize("lr", [0.0, 1.01])
    def test_lr_range(self, chain_mdp, lr):
        with pytest.raises(ValueError):
            weighted_value_iteration(chain_mdp, WeightingStrategy(), lr=lr, iterations=1)

    def test_keep_tables_and_cadence(self, chain_mdp, chain_q_star):
        trace = weighted_value_iteration(
            chain_mdp, WeightingStrategy(), lr=0.1, iterations=10, q_star=chain_q_star,
            record_every=4, keep_tables=True,
        )
        assert [r.iteration for r in trace.records] == [0, 4, 8, 10]
        assert len(trace.q_history) == 11
        assert len(trace.weights_history) == 10
        assert len(trace.optimal_flags) == 11
        np.testing.assert_array_equal(trace.q_history[-1], trace.q)

    def test_wall_time_off_by_default(self, chain_mdp, chain_q_star):
        trace = run_chain(chain_mdp, chain_q_star, StrategyKind.UNIFORM, iterations=3)
        assert all(r.wall_ms == 0.0 for r in trace.records)

    def test_uniform_iteration_zero_entropy(self, chain_mdp, chain_q_star):
        """Sweep 0 reports the entropy of uniform weights over the seven legal pairs."""
        trace = run_chain(chain_mdp, chain_q_star, StrategyKind.UNIFORM, iterations=1)
        assert trace.records[0].mean_weight_entropy == pytest.approx(np.log(7))

    @pytest.mark.parametrize("kind", list(StrategyKind))
    def test_every_kind_produces_feasible_weights(self, corridor_mdp, kind):
        """Each sweep weights the legal table with nonnegative weights of mean 1."""
        q_star = solve_q_star(corridor_mdp)
        trace = weighted_value_iteration(
            corridor_mdp, WeightingStrategy(kind=kind), lr=0.1, iterations=5, q_star=q_star, keep_tables=True,
        )
        mask = corridor_mdp.legal_mask
        for weights in trace.weights_history:
            assert np.all(weights[mask] >= 0.0)
            assert weights[mask].mean() == pytest.approx(1.0, abs=1e-9)
            assert np.all(weights[~mask] == 0.0)
        assert np.all(np.isfinite(trace.q))

    def test_uniform_converges_on_corridor(self, corridor_mdp):
        q_star = solve_q_star(corridor_mdp)
        trace = weighted_value_iteration(corridor_mdp, WeightingStrategy(), lr=1.0, iterations=20, q_star=q_star)
        np.testing.assert_allclose(trace.q, q_star, atol=1e-9)

    def test_single_entry_weight(self, chain_mdp):
        """All weight on (s1, left) moves only that entry, by lr * w * (B*Q - Q)."""
        weights = chain_mdp.zeros()
        weights[1, 0] = float(chain_mdp.n_legal)
        q = weighted_backup_step(chain_mdp.zeros(), chain_mdp, weights, 0.1)
        assert q[1, 0] == pytest.approx(0.1 * 7 * 2.0)
        q[1, 0] = 0.0
        np.testing.assert_array_equal(q, 0.0)

    def test_full_step_is_value_iteration(self, chain_mdp, chain_q_star):
        """lr = 1 with unit weights is plain value iteration; four sweeps solve the chain."""
        q = chain_mdp.zeros()
        for _ in range(4):
            q = weighted_backup_step(q, chain_mdp, np.ones(chain_mdp.table_shape), 1.0)
        np.testing.assert_allclose(q, chain_q_star)


class TestEvaluateQ:
    """Tests for evaluate_q."""

    def test_oracle_columns_without_q_star(self, chain_mdp):
        record = evaluate_q(chain_mdp.zeros(), chain_mdp, None, None, 0, 0.0)
        assert np.isnan(record.q_gap_linf) and np.isnan(record.regret)
        assert record.greedy_return == pytest.approx(2.0)

    def test_values_at_q_star(self, chain_mdp, chain_q_star):
        record = evaluate_q(chain_q_star, chain_mdp, chain_q_star, 5.0, 3, 1.0)
        assert record.td_error_linf == pytest.approx(0.0)
        assert record.q_gap_l1 == 0.0
        assert record.regret == pytest.approx(0.0)
        assert set(record.to_dict()) >= {"iteration", "regret", "wall_ms"}
