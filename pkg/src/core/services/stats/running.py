"""
Streaming mean/variance (Welford updates, Chan et al. batch merge).
"""

from typing import Tuple, Union

import numpy as np


class RunningMoments:
    """Mean and unbiased variance of a stream of equally shaped samples."""

    def __init__(self, shape: Union[int, Tuple[int, ...]] = ()):
        self.count = 0
        self.mean = np.zeros(shape)
        self._m2 = np.zeros(shape)

    def push(self, value: Union[float, np.ndarray]) -> None:
        """Add one sample."""
        self.update(np.asarray(value, dtype=float)[None, ...])

    def update(self, batch: np.ndarray) -> None:
        """Add a batch of samples stacked along axis 0."""
        batch = np.asarray(batch, dtype=float)
        size = batch.shape[0]
        if size == 0:
            return
        batch_mean = batch.mean(axis=0)
        batch_m2 = np.square(batch - batch_mean).sum(axis=0)
        self._combine(size, batch_mean, batch_m2)

    def merge(self, other: "RunningMoments") -> None:
        """Fold another accumulator into this one."""
        if other.count:
            self._combine(other.count, other.mean, other._m2)

    def _combine(self, size: int, mean: np.ndarray, m2: np.ndarray) -> None:
        total = self.count + size
        delta = mean - self.mean
        self.mean = self.mean + delta * (size / total)
        self._m2 = self._m2 + m2 + np.square(delta) * (self.count * size / total)
        self.count = total

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.full_like(self.mean, np.nan, dtype=float)
        return self._m2 / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        """Standard error of the mean; NaN with fewer than two samples"""
        if self.count < 2:
            return np.full_like(self.mean, np.nan, dtype=float)
        return np.sqrt(self.variance / self.count)
