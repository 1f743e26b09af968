"""
Episodic tabular Q-learning with weighted replay

Per environment step: act epsilon-greedily, push the transition, sample a
batch, compute targets y = r + gamma * max_a' Q_target(s', a') (zero
bootstrap at terminal s'), weight the batch with the chosen strategy and
apply Q(s,a) += lr * w * (y - Q(s,a)), with lr * w capped at ``max_step``
when set. Delta and the LFIW ratio are updated on the same cadence when
the strategy uses them. The exact ratio uses the occupancy of the softmax
policy of the current table. The target table is synced every
``target_update_interval`` updates.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from loguru import logger

from ..envs import EpisodeDriver
from ..estimators import (
    BellmanErrorTracker,
    RatioTable,
    discor_penalty_sampled,
    discor_targets,
    expected_tce,
    lfiw_update,
    update_delta,
)
from ..mdp import (
    QTable,
    TabularMdp,
    discounted_occupancy,
    greedy_actions,
    optimal_return,
    softmax_policy,
    state_values,
)
from ..replay import FastSlowBuffers, ReplayBuffer, SampledBatch, apply_weighted_update
from ..weighting import (
    RatioSource,
    StrategyKind,
    WeightBatch,
    WeightInputs,
    WeightingStrategy,
    compute_weights,
    exact_ratio,
    weight_entropy,
)
from .config import EntropyMeter, IterationRecord, LearnerConfig, SamplingMode
from .metrics import evaluate_q

CheckpointCallback = Callable[[int, QTable, ReplayBuffer], None]
EpisodeCallback = Callable[[int, float, bool], None]
BatchCallback = Callable[[SampledBatch, WeightBatch, WeightInputs], None]


@dataclass
class QLearningTrace:
    """
    Result of weighted Q-learning.

    Attributes:
        strategy: Strategy used for the weights
        records: Checkpoint rows, step 0 included
        episode_returns: Undiscounted observed return of every finished episode
        warmup_skips: Steps skipped because the buffer held fewer than batch_size transitions
        updates: Replay updates applied
        q: Final Q table
    """
    strategy: WeightingStrategy
    records: List[IterationRecord] = field(default_factory=list)
    episode_returns: List[float] = field(default_factory=list)
    warmup_skips: int = 0
    updates: int = 0
    q: Optional[QTable] = None


class _TargetTable:
    """Frozen copy of Q with its greedy actions and values cached."""

    def __init__(self, q: QTable, mdp: TabularMdp):
        self.q = q.copy()
        self.values = state_values(self.q, mdp)
        self.actions = greedy_actions(self.q, mdp)


def _explore(q: QTable, state: int, n_actions: int, epsilon: float, rng: np.random.Generator) -> int:
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    return int(np.argmax(q[state, :n_actions]))


def weighted_q_learning(
    driver: EpisodeDriver,
    buffer: ReplayBuffer,
    strategy: WeightingStrategy,
    cfg: LearnerConfig,
    q_star: Optional[QTable] = None,
    on_checkpoint: Optional[CheckpointCallback] = None,
    on_episode_end: Optional[EpisodeCallback] = None,
    on_batch: Optional[BatchCallback] = None,
    record_wall_time: bool = False,
) -> QLearningTrace:
    """
    Train a Q table from replay for ``cfg.total_steps`` environment steps.

    Args:
        driver: Episodic driver; its seed fixes the environment stream
        buffer: Replay buffer shaped for driver.mdp
        strategy: Weighting strategy
        cfg: Learner configuration; cfg.seed fixes exploration and sampling
        q_star: Optimal table for oracle strategies and gap metrics
        on_checkpoint: Called as (step, q, buffer) at every record
        on_episode_end: Called as (trajectory_id, return, censored)
        on_batch: Called with every sampled batch, its weights and inputs
        record_wall_time: Fill wall_ms; otherwise it stays 0

    Returns:
        QLearningTrace
    """
    mdp = driver.mdp
    gamma = mdp.gamma
    explore_seq, sample_seq, lfiw_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    explore_rng = np.random.default_rng(explore_seq)
    sample_rng = np.random.default_rng(sample_seq)

    q = mdp.zeros()
    target = _TargetTable(q, mdp)
    delta = mdp.zeros()
    hindsight = np.full(mdp.table_shape, np.nan)
    tracker = BellmanErrorTracker()
    best_return = None if q_star is None else optimal_return(mdp, q_star)

    use_lfiw = strategy.uses_ratio and strategy.ratio_source is RatioSource.LFIW
    use_exact_ratio = strategy.uses_ratio and strategy.ratio_source is RatioSource.EXACT
    ratio_table = RatioTable(mdp.table_shape, strategy.temperature) if use_lfiw else None
    fast_slow = FastSlowBuffers(buffer, seed=int(lfiw_seq.generate_state(1)[0])) if use_lfiw else None

    trace = QLearningTrace(strategy=strategy)
    entropies = EntropyMeter()
    started = time.perf_counter()

    def record(step: int):
        wall_ms = round((time.perf_counter() - started) * 1000.0, 3) if record_wall_time else 0.0
        row = evaluate_q(q, mdp, q_star, best_return, step, entropies.flush(), wall_ms)
        trace.records.append(row)
        if on_checkpoint is not None:
            on_checkpoint(step, q, buffer)

    logger.info(
        f"Q-learning: strategy={strategy.label}, steps={cfg.total_steps}, "
        f"mode={cfg.sampling_mode.value}, seed={cfg.seed}"
    )
    record(0)
    state = driver.reset()
    episode_return = 0.0

    for step in range(1, cfg.total_steps + 1):
        if driver.episode_finished:
            state = driver.reset()
            episode_return = 0.0

        n_actions = mdp.n_actions_per_state[state]
        action = _explore(q, state, n_actions, cfg.epsilon(step - 1), explore_rng)
        transition = driver.step(action)
        buffer.push(transition)
        episode_return += transition.r
        state = transition.s_next

        if driver.episode_finished:
            buffer.on_episode_end(transition.trajectory_id, censored=driver.truncated)
            trace.episode_returns.append(episode_return)
            if fast_slow is not None:
                fast_slow.refresh()
            if on_episode_end is not None:
                on_episode_end(transition.trajectory_id, episode_return, driver.truncated)

        if len(buffer) < cfg.batch_size:
            trace.warmup_skips += 1
        else:
            batch = buffer.sample(cfg.batch_size, sample_rng)
            states, actions = batch.states, batch.actions
            next_states, dones = batch.next_states, batch.dones
            targets = batch.rewards + gamma * np.where(dones, 0.0, target.values[next_states])
            next_actions = target.actions[next_states]
            td = targets - q[states, actions]
            tau = tracker.update(np.abs(td))
            occupancy = None
            if use_exact_ratio:
                occupancy = discounted_occupancy(mdp, softmax_policy(q, mdp), cfg.gamma_d)

            inputs = _batch_inputs(
                strategy, mdp, buffer, q, td, tau, delta, hindsight, q_star, occupancy,
                ratio_table, states, actions, next_states, next_actions, dones,
                gamma, step / cfg.total_steps,
            )
            weighted = compute_weights(strategy, inputs, len(batch))
            entropies.add(weight_entropy(weighted.weights))
            if on_batch is not None:
                on_batch(batch, weighted, inputs)

            if cfg.sampling_mode is SamplingMode.PRIORITIZED:
                buffer.set_priorities(batch.indices, weighted.weights)
                loss_weights = np.ones(len(batch))
            else:
                loss_weights = weighted.weights

            apply_weighted_update(q, states, actions, targets, loss_weights, cfg.lr, cfg.max_step)
            hindsight[states, actions] = np.abs(q[states, actions] - targets)

            if strategy.uses_delta:
                delta_targets = discor_targets(
                    q[states, actions], targets, delta, next_states, next_actions, dones, gamma,
                )
                update_delta(delta, states, actions, delta_targets, cfg.delta_lr)

            if use_lfiw and fast_slow.fast_size > 0:
                lfiw_update(
                    ratio_table,
                    fast_slow.sample_fast(cfg.lfiw_batch_size),
                    fast_slow.sample_slow(cfg.lfiw_batch_size),
                    cfg.lfiw_lr,
                )

            trace.updates += 1
            if trace.updates % cfg.target_update_interval == 0:
                target = _TargetTable(q, mdp)

        if step % cfg.checkpoint_interval == 0 or step == cfg.total_steps:
            record(step)

    if trace.warmup_skips:
        logger.warning(f"{trace.warmup_skips} steps skipped while the buffer warmed up")
    trace.q = q
    logger.info(
        f"Q-learning finished: strategy={strategy.label}, episodes={len(trace.episode_returns)}, "
        f"updates={trace.updates}"
    )
    return trace


def _batch_inputs(
    strategy: WeightingStrategy,
    mdp: TabularMdp,
    buffer: ReplayBuffer,
    q: QTable,
    td: np.ndarray,
    tau: float,
    delta: np.ndarray,
    hindsight: np.ndarray,
    q_star: Optional[QTable],
    occupancy: Optional[np.ndarray],
    ratio_table: Optional[RatioTable],
    states: np.ndarray,
    actions: np.ndarray,
    next_states: np.ndarray,
    next_actions: np.ndarray,
    dones: np.ndarray,
    gamma: float,
    progress: float,
) -> WeightInputs:
    kind = strategy.kind

    ratio = None
    if strategy.uses_ratio:
        if strategy.ratio_source is RatioSource.EXACT:
            ratio = exact_ratio(occupancy, buffer.mu(), states, actions, len(buffer))
        else:
            ratio = ratio_table.normalized(states, actions)

    penalty = None
    if strategy.uses_delta:
        penalty = discor_penalty_sampled(delta, next_states, next_actions, dones, gamma)

    tce_values = None
    if kind is StrategyKind.REMERT:
        records = buffer.h_records()
        include = strategy.tce.include_censored
        tce_values = np.array([
            expected_tce(
                [h for h, censored in records.get((s, a), ()) if include or not censored],
                strategy.tce, tau, progress,
            )
            for s, a in zip(states, actions)
        ])

    policy_probs = None
    if kind is StrategyKind.FULL_THEOREM:
        policy_probs = softmax_policy(q, mdp)[states, actions]

    hindsight_errors = None
    if kind is StrategyKind.FULL_THEOREM:
        known = hindsight[states, actions]
        hindsight_errors = np.where(np.isnan(known), np.abs(td), known)

    return WeightInputs(
        td_errors=np.abs(td),
        discor_penalty=penalty,
        tau=tau,
        ratio=ratio,
        tce_values=tce_values,
        q_gap=None if q_star is None else np.abs(q - q_star)[states, actions],
        policy_probs=policy_probs,
        hindsight_errors=hindsight_errors,
    )
