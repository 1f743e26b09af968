"""Recurring probability of the policies a run passes through."""

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from loguru import logger

from ..learner import ValueIterationTrace
from ..mdp import QTable, greedy_policy, recurring_probability, softmax_policy, uniform_policy
from ..replay import ReplayBuffer
from .config_file import ExperimentConfig
from .experiment import format_float, run_single

RECURRENCE_HEADER = ("config_id", "seed", "checkpoint", "policy", "epsilon")


@dataclass(frozen=True)
class RecurrenceRow:
    """
    Recurring probability of one policy.

    Attributes:
        checkpoint: Sweep or step at which the Q table was taken (-1 for the uniform policy)
        policy: 'uniform', 'softmax' or 'greedy'
        epsilon: eps_pi in [0, 1]
    """
    config_id: str
    seed: int
    checkpoint: int
    policy: str
    epsilon: float


def estimate_recurrence(config: ExperimentConfig, seed: Optional[int] = None) -> List[RecurrenceRow]:
    """
    Exact eps_pi of the uniform policy, then of the softmax and greedy policies of Q at every record.

    Only the first configured seed is run unless ``seed`` is given.
    """
    seed = config.seeds[0] if seed is None else seed
    tables: List[Tuple[int, QTable]] = []

    def keep(step: int, q: QTable, buffer: ReplayBuffer):
        tables.append((step, q.copy()))

    result = run_single(config, seed, on_checkpoint=keep, keep_tables=True)
    mdp = result.mdp
    if isinstance(result.trace, ValueIterationTrace):
        history = result.trace.q_history
        last = len(history) - 1
        tables = [(k, q) for k, q in enumerate(history) if k % config.metrics.cadence == 0 or k == last]

    rows = [RecurrenceRow(config.config_id, seed, -1, "uniform", recurring_probability(mdp, uniform_policy(mdp)))]
    for step, q in tables:
        for name, pi in (("softmax", softmax_policy(q, mdp)), ("greedy", greedy_policy(q, mdp))):
            rows.append(RecurrenceRow(config.config_id, seed, step, name, recurring_probability(mdp, pi)))

    logger.info(
        f"Recurrence {config.config_id}: uniform eps={rows[0].epsilon:.6g}, "
        f"final greedy eps={rows[-1].epsilon:.6g} over {len(tables)} checkpoints"
    )
    return rows


def write_recurrence_csv(rows: Sequence[RecurrenceRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RECURRENCE_HEADER)
        for row in rows:
            writer.writerow([row.config_id, row.seed, row.checkpoint, row.policy, format_float(row.epsilon)])
    return path
