"""Experiment Harness

Config-file driven experiment runner, reproduction recipes and the
recurrence report. Output is CSV plus plain-text manifests and summaries.
"""

from .config_file import (
    ExperimentConfig,
    HarnessError,
    ConfigError,
    ExperimentRuntimeError,
    BUNDLED_CONFIGS_DIR,
    parse_seed_list,
    parse_config_text,
    config_from_text,
    load_config,
)
from .experiment import (
    METRICS_HEADER,
    MetricsRow,
    SeedRun,
    RunResult,
    build_mdp,
    build_strategy,
    run_single,
    run_seeds,
    run,
    write_metrics_csv,
)
from .recurrence import RecurrenceRow, estimate_recurrence, write_recurrence_csv
from .repro import (
    Verdict,
    ReproResult,
    REPRO_RECIPES,
    repro_fig1,
    repro_gridworld_tce,
    repro_noise,
    repro_h_correlation,
    repro_h_variance,
)

__all__ = [
    "ExperimentConfig",
    "HarnessError",
    "ConfigError",
    "ExperimentRuntimeError",
    "BUNDLED_CONFIGS_DIR",
    "parse_seed_list",
    "parse_config_text",
    "config_from_text",
    "load_config",
    "METRICS_HEADER",
    "MetricsRow",
    "SeedRun",
    "RunResult",
    "build_mdp",
    "build_strategy",
    "run_single",
    "run_seeds",
    "run",
    "write_metrics_csv",
    "RecurrenceRow",
    "estimate_recurrence",
    "write_recurrence_csv",
    "Verdict",
    "ReproResult",
    "REPRO_RECIPES",
    "repro_fig1",
    "repro_gridworld_tce",
    "repro_noise",
    "repro_h_correlation",
    "repro_h_variance",
]
