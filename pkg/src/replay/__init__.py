"""Experience Replay

Episodic replay buffer with sum-tree stratified sampling, exact buffer
statistics, fast/slow views and the weighted tabular update.
"""

from .sum_tree import SumTree
from .buffer import (
    ReplayBuffer,
    BufferSnapshot,
    SampledBatch,
    FastSlowBuffers,
    ReplayError,
    EmptyBufferError,
    WeightContractError,
    weighted_squared_errors,
    apply_weighted_update,
    CSV_COLUMNS,
)

__all__ = [
    "SumTree",
    "ReplayBuffer",
    "BufferSnapshot",
    "SampledBatch",
    "FastSlowBuffers",
    "ReplayError",
    "EmptyBufferError",
    "WeightContractError",
    "weighted_squared_errors",
    "apply_weighted_update",
    "CSV_COLUMNS",
]
