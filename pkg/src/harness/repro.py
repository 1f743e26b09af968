"""
Reproduction recipes

Each recipe runs bundled configs, writes its curves as CSV into
``<out>/<recipe>/`` and a ``summary.txt`` with one verdict line per
expected ordering:

    PASS <name>: <numbers behind the check>
    FAIL <name>: <numbers behind the check>
    INFO <name>: <reported numbers>

PASS/FAIL lines check an ordering; INFO lines report a number that is
observed but not expected to hold in general.

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy import stats

from ..config import settings
from ..envs import EpisodeDriver, run_episode
from ..learner import ValueIterationTrace
from ..mdp import QTable, TabularMdp, bellman_optimal_backup, solve_q_star, uniform_policy
from ..replay import ReplayBuffer
from ..weighting import RatioSource, StrategyKind
from .config_file import ExperimentConfig, load_config
from .experiment import MetricsRow, SeedRun, build_mdp, format_float, run_seeds, run_single, write_metrics_csv


@dataclass(frozen=True)
class Verdict:
    """
    One summary line.

    Attributes:
        name: Short identifier of the checked ordering
        passed: True/False for checked orderings, None for reported numbers
        detail: The numbers behind the verdict
    """
    name: str
    passed: Optional[bool]
    detail: str

    @property
    def line(self) -> str:
        status = "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return f"{status} {self.name}: {self.detail}"


@dataclass
class ReproResult:
    """Files and verdicts of one recipe."""
    name: str
    out_dir: Path
    verdicts: List[Verdict] = field(default_factory=list)
    csv_paths: List[Path] = field(default_factory=list)

    @property
    def summary_path(self) -> Path:
        return self.out_dir / "summary.txt"

    @property
    def passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts)

    def write_summary(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        lines = [f"# {self.name} ({settings.app_name} {settings.app_version})"]
        lines.extend(v.line for v in self.verdicts)
        self.summary_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return self.summary_path


def with_strategy(
    config: ExperimentConfig,
    kind: StrategyKind,
    name: str,
    ratio_source: Optional[RatioSource] = None,
) -> ExperimentConfig:
    """Copy of a config with another strategy kind and experiment name."""
    strategy_update = {"kind": kind}
    if ratio_source is not None:
        strategy_update["ratio_source"] = ratio_source
    return config.model_copy(update={
        "strategy": config.strategy.model_copy(update=strategy_update),
        "experiment": config.experiment.model_copy(update={"name": name}),
    })


def _write_rows(rows: Iterable[MetricsRow], path: Path) -> Path:
    return write_metrics_csv(list(rows), path)


def _write_table(header: Sequence[str], rows: Iterable[Sequence[object]], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    return path


def _metric(run: SeedRun, name: str, iteration: int) -> float:
    for row in run.rows:
        if row.iteration == iteration:
            return float(getattr(row, name))
    raise KeyError(f"no record at iteration {iteration}")


def _final_mean(runs: Sequence[SeedRun], name: str) -> float:
    """Mean over seeds of a metric at the last checkpoint."""
    return float(np.mean([getattr(run.rows[-1], name) for run in runs]))


def repro_fig1(out_dir: Optional[Path] = None, jobs: int = 1) -> ReproResult:
    """
    Weighted value iteration on the chain MDP with Uniform, PER and DisCor weights.

    Checks that PER lowers the TD error and DisCor lowers |Q - Q*| in the
    first sweeps, and compares sweeps until the greedy policy settles.
    """
    result = ReproResult("fig1", Path(out_dir or settings.results_dir) / "fig1")
    base = load_config("fig1")
    runs: Dict[StrategyKind, SeedRun] = {}
    for kind in (StrategyKind.UNIFORM, StrategyKind.PER, StrategyKind.DISCOR):
        config = with_strategy(base, kind, f"fig1_{kind.value}")
        runs[kind] = run_single(config, base.seeds[0])

    rows = [row for run in runs.values() for row in run.rows]
    result.csv_paths.append(_write_rows(rows, result.out_dir / "fig1.csv"))

    uniform, per, discor = runs[StrategyKind.UNIFORM], runs[StrategyKind.PER], runs[StrategyKind.DISCOR]
    early_td = [(k, _metric(per, "td_error_linf", k), _metric(uniform, "td_error_linf", k)) for k in (1, 2, 3)]
    result.verdicts.append(Verdict(
        "per_lower_td_error_early",
        all(p < u for _, p, u in early_td),
        " ".join(f"k={k}:per={p:.6g}/uniform={u:.6g}" for k, p, u in early_td),
    ))
    early_gap = [(k, _metric(discor, "q_gap_l1", k), _metric(uniform, "q_gap_l1", k)) for k in (2, 3)]
    result.verdicts.append(Verdict(
        "discor_lower_q_gap_early",
        all(d < u for _, d, u in early_gap),
        " ".join(f"k={k}:discor={d:.6g}/uniform={u:.6g}" for k, d, u in early_gap),
    ))

    settle = {kind: _settle(run) for kind, run in runs.items()}
    for kind in (StrategyKind.PER, StrategyKind.DISCOR):
        u, other = settle[StrategyKind.UNIFORM], settle[kind]
        passed = u is not None and (other is None or u < other)
        result.verdicts.append(Verdict(
            f"uniform_before_{kind.value}", passed, f"uniform={u} {kind.value}={other}",
        ))
    result.write_summary()
    return result


def _settle(run: SeedRun) -> Optional[int]:
    trace = run.trace
    return trace.iterations_to_optimal if isinstance(trace, ValueIterationTrace) else None


GRIDWORLD_TCE_STRATEGIES: Tuple[Tuple[str, StrategyKind, RatioSource], ...] = (
    ("oracle", StrategyKind.ORACLE, RatioSource.NONE),
    ("tce", StrategyKind.REMERT, RatioSource.NONE),
    ("discor", StrategyKind.DISCOR, RatioSource.NONE),
    ("uniform", StrategyKind.UNIFORM, RatioSource.NONE),
)


def repro_gridworld_tce(
    out_dir: Optional[Path] = None,
    jobs: int = 1,
    layouts: Sequence[str] = ("four_rooms", "maze"),
    seeds: Optional[Sequence[int]] = None,
) -> ReproResult:
    """
    Q-learning on the gridworlds with Oracle, TCE, DisCor and Uniform weights.

    The compared number is |Q - Q*|_1 at the final checkpoint, averaged over seeds.
    """
    result = ReproResult("gridworld_tce", Path(out_dir or settings.results_dir) / "gridworld_tce")
    for layout in layouts:
        base = load_config(f"gridworld_tce_{layout}")
        run_seeds_list = tuple(base.seeds if seeds is None else seeds)
        means: Dict[str, float] = {}
        rows: List[MetricsRow] = []
        for label, kind, ratio in GRIDWORLD_TCE_STRATEGIES:
            config = with_strategy(base, kind, f"{layout}_{label}", ratio)
            runs = run_seeds(config, run_seeds_list, jobs)
            rows.extend(row for run in runs for row in run.rows)
            means[label] = _final_mean(runs, "q_gap_l1")
            logger.info(f"gridworld_tce {layout}/{label}: final q_gap_l1={means[label]:.6g}")
        result.csv_paths.append(_write_rows(rows, result.out_dir / f"{layout}.csv"))

        numbers = " ".join(f"{label}={value:.6g}" for label, value in means.items())
        result.verdicts.append(Verdict(f"{layout}_oracle_le_tce", means["oracle"] <= means["tce"], numbers))
        result.verdicts.append(Verdict(f"{layout}_tce_le_discor", means["tce"] <= means["discor"], numbers))
        result.verdicts.append(Verdict(f"{layout}_tce_le_uniform", means["tce"] <= means["uniform"], numbers))
        result.verdicts.append(Verdict(f"{layout}_oracle_le_uniform", means["oracle"] <= means["uniform"], numbers))
    result.write_summary()
    return result


def distance_records(
    config: ExperimentConfig, seed: int, sigma: float, episodes: int,
) -> List[Tuple[int, int, int, int]]:
    """(s, a, s_next, distance_to_end) of uniform-policy episodes at reward noise sigma."""
    mdp = build_mdp(config.env)
    driver = EpisodeDriver(
        mdp, seed=seed, max_episode_steps=config.learner.max_episode_steps, reward_noise_sigma=sigma,
    )
    pi = uniform_policy(mdp)
    records: List[Tuple[int, int, int, int]] = []
    for _ in range(episodes):
        for t in run_episode(driver, pi):
            records.append((t.s, t.a, t.s_next, t.distance_to_end))
    return records


def repro_noise(
    out_dir: Optional[Path] = None,
    jobs: int = 1,
    sigmas: Sequence[float] = (0.0, 0.5),
    seeds: Optional[Sequence[int]] = None,
    invariance_episodes: int = 20,
) -> ReproResult:
    """
    Reward-noise robustness on FourRooms.

    Distance-to-end records of matched seeds must not depend on sigma; the
    final regret of ReMERT and Uniform at the largest sigma is compared
    averaged over seeds.
    """
    result = ReproResult("noise", Path(out_dir or settings.results_dir) / "noise")
    base = load_config("noise")
    run_seed_list = tuple(base.seeds if seeds is None else seeds)

    mismatched = [
        seed for seed in run_seed_list
        if len({tuple(distance_records(base, seed, s, invariance_episodes)) for s in sigmas}) != 1
    ]
    result.verdicts.append(Verdict(
        "distance_to_end_invariant",
        not mismatched,
        f"sigmas={list(sigmas)} seeds={len(run_seed_list)} mismatched={mismatched}",
    ))

    sigma = max(sigmas)
    noisy = base.model_copy(update={"env": base.env.model_copy(update={"reward_noise_sigma": sigma})})
    final_regret: Dict[str, float] = {}
    rows: List[MetricsRow] = []
    for kind in (StrategyKind.REMERT, StrategyKind.UNIFORM):
        config = with_strategy(noisy, kind, f"noise_{kind.value}")
        runs = run_seeds(config, run_seed_list, jobs)
        rows.extend(row for run in runs for row in run.rows)
        final_regret[kind.value] = _final_mean(runs, "regret")
    result.csv_paths.append(_write_rows(rows, result.out_dir / "noise.csv"))

    result.verdicts.append(Verdict(
        "remert_regret_le_uniform",
        final_regret["remert"] <= final_regret["uniform"],
        f"sigma={sigma} remert={final_regret['remert']:.6g} uniform={final_regret['uniform']:.6g}",
    ))
    result.write_summary()
    return result


def _mean_h(buffer: ReplayBuffer) -> Dict[Tuple[int, int], float]:
    means = {}
    for key, record in buffer.h_records().items():
        values = [h for h, censored in record if not censored]
        if values:
            means[key] = float(np.mean(values))
    return means


def h_error_correlation(q: QTable, q_star: QTable, mdp: TabularMdp, buffer: ReplayBuffer) -> Tuple[int, float, float]:
    """(pairs, Spearman rho, p-value) between mean recorded h and |B*Q - Q*| over recorded pairs."""
    means = _mean_h(buffer)
    if len(means) < 3:
        return len(means), float("nan"), float("nan")
    error = np.abs(bellman_optimal_backup(q, mdp) - q_star)
    keys = sorted(means)
    h = np.array([means[k] for k in keys])
    e = np.array([error[k] for k in keys])
    if np.ptp(h) == 0.0 or np.ptp(e) == 0.0:
        return len(keys), float("nan"), float("nan")
    rho, p_value = stats.spearmanr(h, e)
    return len(keys), float(rho), float(p_value)


def repro_h_correlation(out_dir: Optional[Path] = None, jobs: int = 1) -> ReproResult:
    """Rank correlation between distance to end and the error of the Bellman target, per checkpoint."""
    result = ReproResult("h_correlation", Path(out_dir or settings.results_dir) / "h_correlation")
    config = load_config("h_correlation")
    mdp = build_mdp(config.env)
    q_star = solve_q_star(mdp)
    rows: List[Tuple[object, ...]] = []

    for seed in config.seeds:

        def measure(step: int, q: QTable, buffer: ReplayBuffer, seed: int = seed):
            n, rho, p = h_error_correlation(q, q_star, mdp, buffer)
            rows.append((config.config_id, seed, step, n, rho, p))

        run_single(config, seed, on_checkpoint=measure)

    result.csv_paths.append(_write_table(
        ("config_id", "seed", "checkpoint", "pairs", "spearman_rho", "p_value"),
        rows,
        result.out_dir / "h_correlation.csv",
    ))
    rhos = [row[4] for row in rows if not np.isnan(row[4])]
    mean_rho = float(np.mean(rhos)) if rhos else float("nan")
    result.verdicts.append(Verdict(
        "h_error_positive_correlation",
        bool(rhos) and mean_rho > 0.0,
        f"mean_rho={mean_rho:.6g} checkpoints={len(rhos)}",
    ))
    result.write_summary()
    return result


def state_h_variance(buffer: ReplayBuffer, n_states: int) -> List[Tuple[int, int, float]]:
    """(state, count, variance) of the recent uncensored distances recorded from each state."""
    per_state: Dict[int, List[int]] = {}
    for (s, _), record in buffer.h_records().items():
        per_state.setdefault(s, []).extend(h for h, censored in record if not censored)
    out = []
    for s in range(n_states):
        values = per_state.get(s, [])
        if len(values) >= 2:
            out.append((s, len(values), float(np.var(values))))
    return out


def repro_h_variance(out_dir: Optional[Path] = None, jobs: int = 1) -> ReproResult:
    """Per-state variance of distance to end over the recent trajectories held in the h-records."""
    result = ReproResult("h_variance", Path(out_dir or settings.results_dir) / "h_variance")
    config = load_config("h_variance")
    mdp = build_mdp(config.env)
    rows: List[Tuple[object, ...]] = []
    firsts: List[float] = []
    lasts: List[float] = []

    for seed in config.seeds:
        means: List[float] = []

        def measure(step: int, q: QTable, buffer: ReplayBuffer, seed: int = seed):
            variances = state_h_variance(buffer, mdp.n_states)
            for s, count, variance in variances:
                rows.append((config.config_id, seed, step, mdp.label(s), count, variance))
            if variances:
                means.append(float(np.mean([v for _, _, v in variances])))

        run_single(config, seed, on_checkpoint=measure)
        if means:
            firsts.append(means[0])
            lasts.append(means[-1])

    result.csv_paths.append(_write_table(
        ("config_id", "seed", "checkpoint", "state", "count", "h_variance"),
        rows,
        result.out_dir / "h_variance.csv",
    ))
    first = float(np.mean(firsts)) if firsts else float("nan")
    last = float(np.mean(lasts)) if lasts else float("nan")
    result.verdicts.append(Verdict("h_variance_change", None, f"first={first:.6g} last={last:.6g}"))
    result.write_summary()
    return result


REPRO_RECIPES: Dict[str, Callable[..., ReproResult]] = {
    "fig1": repro_fig1,
    "gridworld-tce": repro_gridworld_tce,
    "noise": repro_noise,
    "h-correlation": repro_h_correlation,
    "h-variance": repro_h_variance,
}
