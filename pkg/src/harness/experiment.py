"""
Experiment runner

Runs one configuration over its seeds, in a thread pool when ``jobs > 1``,
and writes two plain-text artifacts into the output directory:

    <config_id>.csv            metrics rows sorted by (config_id, seed, iteration)
    <config_id>.manifest.txt   version, hashes, seeds and the resolved config

Floats are written with 12 significant digits and wall_ms stays 0 unless
``metrics.record_wall_time`` is set, so reruns are byte-identical.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import csv
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..config import settings
from ..envs import (
    EpisodeDriver,
    LayoutParseError,
    build_chain_mdp,
    build_cycle_mdp,
    build_gridworld,
    build_random_mdp,
    load_layout,
)
from ..estimators import TceConfig
from ..learner import (
    IterationRecord,
    QLearningTrace,
    ValueIterationTrace,
    weighted_q_learning,
    weighted_value_iteration,
)
from ..learner.q_learning import CheckpointCallback, EpisodeCallback
from ..mdp import MdpError, QTable, TabularMdp, solve_q_star, suboptimality_constant
from ..replay import ReplayBuffer, ReplayError
from ..weighting import WeightingError, WeightingStrategy
from .config_file import ConfigError, EnvSection, ExperimentConfig, ExperimentRuntimeError

METRICS_HEADER: Tuple[str, ...] = (
    "config_id",
    "seed",
    "iteration",
    "strategy",
    "td_error_l1",
    "q_gap_linf",
    "greedy_return",
    "regret",
    "mean_weight_entropy",
    "wall_ms",
    "td_error_linf",
    "q_gap_l1",
)


def format_float(value: float) -> str:
    if math.isnan(value):
        return "nan"
    return format(value, ".12g")


@dataclass(frozen=True)
class MetricsRow:
    """
    One line of a metrics CSV.

    Attributes:
        config_id: experiment.name of the config
        seed: Seed of the run
        iteration: Sweep or environment step
        strategy: Strategy label
        td_error_l1 .. q_gap_l1: Metrics of IterationRecord
    """
    config_id: str
    seed: int
    iteration: int
    strategy: str
    td_error_l1: float
    q_gap_linf: float
    greedy_return: float
    regret: float
    mean_weight_entropy: float
    wall_ms: float
    td_error_linf: float
    q_gap_l1: float

    @classmethod
    def from_record(cls, config_id: str, seed: int, strategy: str, record: IterationRecord) -> "MetricsRow":
        return cls(
            config_id=config_id,
            seed=seed,
            iteration=record.iteration,
            strategy=strategy,
            td_error_l1=record.td_error_l1,
            q_gap_linf=record.q_gap_linf,
            greedy_return=record.greedy_return,
            regret=record.regret,
            mean_weight_entropy=record.mean_weight_entropy,
            wall_ms=record.wall_ms,
            td_error_linf=record.td_error_linf,
            q_gap_l1=record.q_gap_l1,
        )

    @property
    def sort_key(self) -> Tuple[str, int, int]:
        return self.config_id, self.seed, self.iteration

    def csv_fields(self) -> List[str]:
        fields = [self.config_id, str(self.seed), str(self.iteration), self.strategy]
        for name in METRICS_HEADER[4:]:
            fields.append(format_float(float(getattr(self, name))))
        return fields


@dataclass
class SeedRun:
    """Everything one (config, seed) run produced."""
    seed: int
    mdp: TabularMdp
    q_star: QTable
    strategy: WeightingStrategy
    rows: List[MetricsRow]
    trace: Union[ValueIterationTrace, QLearningTrace]
    buffer: Optional[ReplayBuffer] = None


@dataclass
class RunResult:
    """
    Output of a full run.

    Attributes:
        config: Config that was run
        seeds: Seeds in run order
        rows: All metrics rows, sorted
        csv_path: Metrics CSV, None when nothing was written
        manifest_path: Manifest, None when nothing was written
        runs: Per-seed results in seed order
    """
    config: ExperimentConfig
    seeds: Tuple[int, ...]
    rows: List[MetricsRow]
    csv_path: Optional[Path] = None
    manifest_path: Optional[Path] = None
    runs: List[SeedRun] = field(default_factory=list)


def build_mdp(env: EnvSection) -> TabularMdp:
    """Build the environment an EnvSection names."""
    if env.name == "chain":
        return build_chain_mdp(gamma=env.gamma)
    if env.name == "gridworld":
        try:
            layout = load_layout(env.layout)
        except (FileNotFoundError, LayoutParseError) as e:
            raise ConfigError(f"env.layout: {e}") from e
        return build_gridworld(layout, gamma=env.gamma, goal_reward=env.goal_reward, step_reward=env.step_reward)
    if env.name == "random":
        rng = np.random.default_rng(env.mdp_seed)
        return build_random_mdp(env.n_states, env.n_actions, env.gamma, rng, n_terminal=env.n_terminal)
    return build_cycle_mdp(env.n_states, gamma=env.gamma, stay_probability=env.stay_probability)


def build_strategy(config: ExperimentConfig, mdp: TabularMdp, q_star: QTable) -> WeightingStrategy:
    """Combine the strategy and tce sections; c = 'auto' resolves against Q*."""
    tce_section = config.tce.model_dump()
    if tce_section["c"] == "auto":
        tce_section["c"] = suboptimality_constant(q_star, mdp)
    return WeightingStrategy(**config.strategy.model_dump(), tce=TceConfig(**tce_section))


def run_single(
    config: ExperimentConfig,
    seed: int,
    on_checkpoint: Optional[CheckpointCallback] = None,
    on_episode_end: Optional[EpisodeCallback] = None,
    keep_tables: bool = False,
) -> SeedRun:
    """
    Run one seed of a config.

    keep_tables keeps Q_0 .. Q_K of a value-iteration run on the trace.

    Raises:
        ExperimentRuntimeError: If the learner or environment fails
    """
    try:
        mdp = build_mdp(config.env)
        q_star = solve_q_star(mdp)
        strategy = build_strategy(config, mdp, q_star)
        learner = config.learner
        buffer = None

        if config.experiment.mode == "value_iteration":
            trace: Union[ValueIterationTrace, QLearningTrace] = weighted_value_iteration(
                mdp,
                strategy,
                lr=learner.lr,
                iterations=learner.iterations,
                q_star=q_star,
                gamma_d=learner.gamma_d,
                record_every=config.metrics.cadence,
                keep_tables=keep_tables,
                record_wall_time=config.metrics.record_wall_time,
            )
        else:
            cfg = learner.model_copy(update={"seed": seed, "checkpoint_interval": config.metrics.cadence})
            driver = EpisodeDriver(
                mdp,
                seed=seed,
                max_episode_steps=cfg.max_episode_steps,
                reward_noise_sigma=config.env.reward_noise_sigma,
            )
            buffer = ReplayBuffer(cfg.buffer_capacity, mdp.table_shape, priority_floor=strategy.priority_floor)
            trace = weighted_q_learning(
                driver,
                buffer,
                strategy,
                cfg,
                q_star=q_star,
                on_checkpoint=on_checkpoint,
                on_episode_end=on_episode_end,
                record_wall_time=config.metrics.record_wall_time,
            )
    except (MdpError, ReplayError, WeightingError, ValueError, RuntimeError) as e:
        raise ExperimentRuntimeError(f"{config.config_id} seed {seed}: {e}") from e

    rows = [MetricsRow.from_record(config.config_id, seed, strategy.label, r) for r in trace.records]
    return SeedRun(seed=seed, mdp=mdp, q_star=q_star, strategy=strategy, rows=rows, trace=trace, buffer=buffer)


def run_seeds(
    config: ExperimentConfig,
    seeds: Sequence[int],
    jobs: int = 1,
    runner: Optional[Callable[[ExperimentConfig, int], SeedRun]] = None,
) -> List[SeedRun]:
    """Run every seed, in parallel when jobs > 1; results come back in seed order."""
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    runner = runner or run_single
    if jobs == 1 or len(seeds) == 1:
        return [runner(config, seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda seed: runner(config, seed), seeds))


def write_metrics_csv(rows: Sequence[MetricsRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(METRICS_HEADER)
        for row in sorted(rows, key=lambda r: r.sort_key):
            writer.writerow(row.csv_fields())
    return path


def file_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(config: ExperimentConfig, seeds: Sequence[int], csv_path: Path, path: Path) -> Path:
    """Write the run manifest: version, config hash, CSV hash and resolved config."""
    resolved = config.model_copy(update={"seeds": tuple(seeds)})
    lines = [
        f"config_id = {config.config_id}",
        f"version = {settings.app_version}",
        f"config_sha256 = {resolved.sha256()}",
        f"csv = {csv_path.name}",
        f"csv_sha256 = {file_sha256(csv_path)}",
        "",
        "# resolved configuration",
        resolved.echo().rstrip("\n"),
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def run(
    config: ExperimentConfig,
    out_dir: Optional[Path] = None,
    jobs: int = 1,
    seeds: Optional[Sequence[int]] = None,
) -> RunResult:
    """
    Run a config over its seeds and write the metrics CSV plus manifest.

    Args:
        config: Parsed experiment config
        out_dir: Output directory, output.dir by default
        jobs: Worker threads
        seeds: Seeds overriding the config's own list

    Returns:
        RunResult with paths to the written files
    """
    seeds = tuple(config.seeds if seeds is None else seeds)
    out_dir = Path(out_dir or config.output.dir)
    logger.info(f"Running {config.config_id}: mode={config.experiment.mode}, seeds={list(seeds)}, jobs={jobs}")

    runs = run_seeds(config, seeds, jobs)
    rows = sorted((row for r in runs for row in r.rows), key=lambda r: r.sort_key)

    csv_path = write_metrics_csv(rows, out_dir / f"{config.config_id}.csv")
    manifest_path = write_manifest(config, seeds, csv_path, out_dir / f"{config.config_id}.manifest.txt")
    logger.info(f"Wrote {len(rows)} rows to {csv_path}")
    return RunResult(
        config=config, seeds=seeds, rows=rows, csv_path=csv_path, manifest_path=manifest_path, runs=runs,
    )
