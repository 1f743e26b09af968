"""
Experiment configuration files

Flat text, one ``dotted.key = value`` per line, ``#`` starts a comment.
Values are kept as strings and validated by the pydantic models, which
reject unknown keys; validation errors are reported against the line the
offending key came from.

    experiment.name = fig1
    env.name = chain
    strategy.kind = discor
    learner.lr = 0.1
    seeds = 0..9

Author: ReplayLab Team
Version: 0.3.0
Python: >=3.9
"""

import hashlib
import re
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union, get_args, get_origin

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..config import settings
from ..learner import LearnerConfig
from ..weighting import RatioSource, StrategyKind

KEY_PATTERN = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)?$")
BUNDLED_CONFIGS_DIR = Path(__file__).parent / "configs"
HASH_EXCLUDED_SECTIONS = ("output",)

ENV_DEFAULT_GAMMA = {"chain": 1.0, "gridworld": 0.99, "random": 0.9, "cycle": 0.9}
MODE_DEFAULT_CADENCE = {"value_iteration": 1, "q_learning": 500}


class HarnessError(Exception):
    """Base exception for experiment harness errors."""
    pass


class ConfigError(HarnessError):
    """Exception for unparseable or invalid experiment configuration."""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        where = source or "<config>"
        prefix = f"{where}:{line}: " if line is not None else f"{where}: "
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.source = source


class ExperimentRuntimeError(HarnessError):
    """Exception for failures while an experiment is running."""
    pass


def parse_seed_list(value: Union[str, int, List[int], Tuple[int, ...]]) -> Tuple[int, ...]:
    """Parse '3', '0..9' (inclusive) or '1,4,7' into a tuple of seeds."""
    if isinstance(value, int):
        return (value,)
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    text = str(value).strip()
    if ".." in text:
        start, _, stop = text.partition("..")
        first, last = int(start), int(stop)
        if last < first:
            raise ValueError(f"empty seed range '{text}'")
        return tuple(range(first, last + 1))
    seeds = tuple(int(part) for part in text.split(",") if part.strip())
    if not seeds:
        raise ValueError("seed list is empty")
    return seeds


class ExperimentSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "experiment"
    mode: Literal["value_iteration", "q_learning"] = "value_iteration"


class EnvSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: Literal["chain", "gridworld", "random", "cycle"] = "chain"
    gamma: float = Field(1.0, gt=0.0, le=1.0)
    layout: str = "four_rooms"
    goal_reward: float = 1.0
    step_reward: float = 0.0
    reward_noise_sigma: float = Field(0.0, ge=0.0)
    n_states: int = Field(10, ge=2)
    n_actions: int = Field(3, ge=1)
    n_terminal: int = Field(0, ge=0)
    stay_probability: float = Field(0.0, ge=0.0, lt=1.0)
    mdp_seed: int = 0


class StrategySection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: StrategyKind = StrategyKind.UNIFORM
    ratio_source: RatioSource = RatioSource.EXACT
    temperature: float = Field(default_factory=lambda: settings.lfiw_temperature, gt=0.0)
    tau: Optional[float] = Field(None, gt=0.0)
    per_alpha: float = Field(1.0, ge=0.0)
    priority_floor: float = Field(default_factory=lambda: settings.priority_floor, ge=0.0)
    policy_factor: bool = True


class TceSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    c: Union[float, Literal["auto"]] = "auto"
    gamma: float = Field(0.99, gt=0.0, le=1.0)
    b1_start: float = 0.4
    b1_end: float = 0.9
    b2_start: float = 1.6
    b2_end: float = 1.1
    include_censored: bool = False


class MetricsSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    cadence: int = Field(1, ge=1)
    record_wall_time: bool = False


class OutputSection(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dir: Path = Field(default_factory=lambda: settings.results_dir)


class ExperimentConfig(BaseModel):
    """
    Declarative description of one experiment.

    Attributes:
        experiment: Name (the config id) and training mode
        env: Environment name and parameters
        strategy: Weighting strategy and hyperparameters
        tce: TCE parameters; c = 'auto' takes the suboptimality constant of Q*
        learner: Learner hyperparameters (the seed comes from ``seeds``)
        metrics: Record cadence and wall-time switch
        output: Output directory
        seeds: Seeds to run
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    env: EnvSection = Field(default_factory=EnvSection)
    strategy: StrategySection = Field(default_factory=StrategySection)
    tce: TceSection = Field(default_factory=TceSection)
    learner: LearnerConfig = Field(default_factory=LearnerConfig)
    metrics: MetricsSection = Field(default_factory=MetricsSection)
    output: OutputSection = Field(default_factory=OutputSection)
    seeds: Tuple[int, ...] = (0,)

    @model_validator(mode="before")
    @classmethod
    def _fill_dependent_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = {key: dict(value) if isinstance(value, dict) else value for key, value in data.items()}
        env = data.setdefault("env", {})
        if isinstance(env, dict) and env.get("gamma") is None:
            env["gamma"] = ENV_DEFAULT_GAMMA.get(env.get("name", "chain"), 0.99)
        tce = data.setdefault("tce", {})
        if isinstance(tce, dict) and isinstance(env, dict) and tce.get("gamma") is None:
            tce["gamma"] = env["gamma"]
        experiment = data.get("experiment", {})
        metrics = data.setdefault("metrics", {})
        if isinstance(metrics, dict) and metrics.get("cadence") is None:
            mode = experiment.get("mode", "value_iteration") if isinstance(experiment, dict) else "value_iteration"
            metrics["cadence"] = MODE_DEFAULT_CADENCE.get(mode, 1)
        return data

    @field_validator("seeds", mode="before")
    @classmethod
    def _parse_seeds(cls, value: Any) -> Tuple[int, ...]:
        return parse_seed_list(value)

    @property
    def config_id(self) -> str:
        return self.experiment.name

    def resolved_items(self) -> List[Tuple[str, str]]:
        """Every setting as (dotted key, text value), defaults included."""
        items: List[Tuple[str, str]] = []
        dumped = self.model_dump(mode="json")
        for section, values in dumped.items():
            if section == "seeds":
                continue
            for key, value in values.items():
                if (section, key) == ("learner", "seed"):
                    continue
                items.append((f"{section}.{key}", _format_value(value)))
        items.append(("seeds", ",".join(str(seed) for seed in self.seeds)))
        return items

    def echo(self) -> str:
        return "\n".join(f"{key} = {value}" for key, value in self.resolved_items()) + "\n"

    def sha256(self) -> str:
        """Hash of the resolved configuration and seeds, output location excluded."""
        hashed = [
            f"{key} = {value}"
            for key, value in self.resolved_items()
            if key.split(".")[0] not in HASH_EXCLUDED_SECTIONS
        ]
        return hashlib.sha256("\n".join(hashed).encode("utf-8")).hexdigest()


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def parse_config_text(text: str, source: Optional[str] = None) -> Tuple[Dict[str, str], Dict[str, int]]:
    """
    Split config text into {dotted key: raw value} plus the line of each key.

    Raises:
        ConfigError: Malformed line, invalid key or duplicate key
    """
    values: Dict[str, str] = {}
    lines: Dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if not KEY_PATTERN.match(key):
            raise ConfigError(f"invalid key {key!r}; keys look like 'section.field'", number, source)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", number, source)
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        values[key] = value
        lines[key] = number
    return values, lines


def _keeps_none_text(section: str, field: str) -> bool:
    """True where 'none' is itself a valid choice, e.g. strategy.ratio_source."""
    section_field = ExperimentConfig.model_fields.get(section)
    model = section_field.annotation if section_field is not None else None
    if not (isinstance(model, type) and issubclass(model, BaseModel)):
        return False
    target = model.model_fields.get(field)
    if target is None:
        return False
    annotation = target.annotation
    if isinstance(annotation, type) and issubclass(annotation, Enum):
        return any(member.value == "none" for member in annotation)
    return get_origin(annotation) is Literal and "none" in get_args(annotation)


def _nest(values: Dict[str, str]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in values.items():
        if "." in key:
            section, field = key.split(".", 1)
            keep = value.lower() != "none" or _keeps_none_text(section, field)
            nested.setdefault(section, {})[field] = value if keep else None
        else:
            nested[key] = None if value.lower() == "none" else value
    return nested


def _line_for(loc: Tuple[Any, ...], lines: Dict[str, int]) -> Optional[int]:
    parts = [str(part) for part in loc]
    for depth in (2, 1):
        key = ".".join(parts[:depth])
        if key in lines:
            return lines[key]
    if parts:
        for key, number in lines.items():
            if key.split(".")[0] == parts[0]:
                return number
    return None


def _describe(error: Dict[str, Any]) -> str:
    loc = tuple(str(part) for part in error.get("loc", ()))
    key = ".".join(loc[:2]) if loc else "<config>"
    if loc[:2] == ("strategy", "kind"):
        valid = ", ".join(kind.value for kind in StrategyKind)
        return f"unknown strategy {error.get('input')!r}; valid strategies: {valid}"
    if error.get("type") == "extra_forbidden":
        return f"unknown key '{key}'"
    return f"{key}: {error.get('msg')}"


def config_from_text(text: str, source: Optional[str] = None) -> ExperimentConfig:
    """
    Parse and validate configuration text.

    Raises:
        ConfigError: On any parse or validation error, with the line number
    """
    values, lines = parse_config_text(text, source)
    if "learner.seed" in values:
        raise ConfigError("set 'seeds' instead of 'learner.seed'", lines["learner.seed"], source)
    try:
        return ExperimentConfig.model_validate(_nest(values))
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(_describe(first), _line_for(first.get("loc", ()), lines), source) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Load a config file by path, or a bundled config by name (e.g. 'fig1')."""
    path = Path(path)
    if not path.exists():
        bundled = BUNDLED_CONFIGS_DIR / f"{path.stem}.cfg"
        if not bundled.exists():
            names = ", ".join(sorted(p.stem for p in BUNDLED_CONFIGS_DIR.glob("*.cfg")))
            raise ConfigError(f"config file not found; bundled configs: {names}", source=str(path))
        path = bundled
    return config_from_text(path.read_text(encoding="utf-8"), source=str(path))
