"""
Likelihood-free density ratio between the fast and slow buffers

kappa(s,a) = exp(theta(s,a)) estimates d_fast / d_slow by minimising the
variational f-divergence objective with f(u) = u log u (KL):

    L(theta) = E_slow[f*(f'(kappa))] - E_fast[f'(kappa)]
             = E_slow[exp(theta)] - E_fast[theta + 1]

whose gradient in theta(x) is p_slow(x) exp(theta(x)) - p_fast(x), zero
exactly at kappa = p_fast / p_slow.
"""

from typing import Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..config import settings

PairBatch = Tuple[np.ndarray, np.ndarray]


def kl_f_prime(u: np.ndarray) -> np.ndarray:
    return np.log(u) + 1.0


def kl_f_conjugate(t: np.ndarray) -> np.ndarray:
    return np.exp(t - 1.0)


class RatioTable:
    """
    Log-parameterised ratio table; kappa is strictly positive by construction.

    Attributes:
        theta: log kappa over (s, a), initialised to 0 (kappa = 1)
        temperature: T used by ``normalized``
    """

    def __init__(self, table_shape: Tuple[int, int], temperature: Optional[float] = None):
        temperature = settings.lfiw_temperature if temperature is None else temperature
        if temperature <= 0.0:
            raise ValueError(f"temperature must be > 0, got {temperature}")
        self.theta = np.zeros(table_shape, dtype=np.float64)
        self.temperature = temperature
        self.steps = 0

    @property
    def kappa(self) -> NDArray[np.float64]:
        return np.exp(self.theta)

    def normalized(self, states: np.ndarray, actions: np.ndarray) -> NDArray[np.float64]:
        """Tempered, batch-normalized ratios for the given pairs."""
        return normalize_ratio(self.kappa[states, actions], self.temperature)


def _frequencies(pairs: PairBatch, shape: Tuple[int, int]) -> NDArray[np.float64]:
    states, actions = (np.asarray(x, dtype=np.int64) for x in pairs)
    if states.size == 0:
        raise ValueError("LFIW batches must be nonempty")
    flat = np.ravel_multi_index((states, actions), shape)
    counts = np.bincount(flat, minlength=shape[0] * shape[1]).astype(np.float64)
    return (counts / states.size).reshape(shape)


def lfiw_loss(ratio: RatioTable, fast: PairBatch, slow: PairBatch) -> float:
    shape = ratio.theta.shape
    p_fast = _frequencies(fast, shape)
    p_slow = _frequencies(slow, shape)
    kappa = ratio.kappa
    return float((p_slow * kl_f_conjugate(kl_f_prime(kappa))).sum() - (p_fast * kl_f_prime(kappa)).sum())


def lfiw_update(ratio: RatioTable, fast: PairBatch, slow: PairBatch, lr: float) -> RatioTable:
    """
    One gradient step on the KL objective from a fast and a slow batch of
    (states, actions). Updates ``ratio`` in place and returns it.
    """
    shape = ratio.theta.shape
    p_fast = _frequencies(fast, shape)
    p_slow = _frequencies(slow, shape)
    gradient = p_slow * np.exp(ratio.theta) - p_fast
    ratio.theta -= lr * gradient
    ratio.steps += 1
    return ratio


def normalize_ratio(kappa: np.ndarray, temperature: float) -> NDArray[np.float64]:
    """kappa^(1/T) / mean(kappa^(1/T))."""
    tempered = np.power(np.asarray(kappa, dtype=np.float64), 1.0 / temperature)
    return tempered / tempered.mean()
