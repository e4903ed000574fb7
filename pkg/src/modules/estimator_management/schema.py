"""
Estimator containers: the misspecified LMMSE matrix, its estimates and conditional errors.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class SolveRoute(str, Enum):
    """Which Gram matrix the direct solve inverts"""
    OBSERVATION_SPACE = "observation_space"  # A^T (A A^T + s I)^-1, n x n solve
    FEATURE_SPACE = "feature_space"  # (A^T A + s I)^-1 A^T, p_bar x p_bar solve


@dataclass(frozen=True, eq=False)
class MisspecifiedEstimator:
    """W_bar = A_bar^T (A_bar A_bar^T + sigma_hat2 I)^+ split into shared and fake rows"""

    W_bar: np.ndarray
    p_S: int
    p_C: int
    sigma_hat2: float

    @property
    def W_S(self) -> np.ndarray:
        return self.W_bar[: self.p_S]

    @property
    def W_F(self) -> np.ndarray:
        return self.W_bar[self.p_S :]

    @property
    def n(self) -> int:
        return int(self.W_bar.shape[1])

    @property
    def p_bar(self) -> int:
        return int(self.W_bar.shape[0])


@dataclass(frozen=True, eq=False)
class Estimate:
    """Estimates of (x_S, x_F, x_C); x_C is not estimated and is always zero"""

    x_S_hat: np.ndarray
    x_F_hat: np.ndarray
    x_C_hat: np.ndarray


@dataclass(frozen=True)
class ConditionalMse:
    """
    MSE given the assumed feature matrix, averaged over unknowns, noise and A_C.

    eps1 = tr((I - W_S A_S) K_x_S (I - W_S A_S)^T) and eps2_weight = tr(W_S W_S^T);
    the fake-feature error splits the same way into a leak and an amplification.
    """

    eps1: float
    eps2_weight: float
    eps_C: float
    fake_leak: float
    fake_amplification: float
    sigma_v2: float

    @property
    def effective_noise(self) -> float:
        """Missing-feature power plus true noise: what W_S amplifies"""
        return self.eps_C + self.sigma_v2

    @property
    def eps_S(self) -> float:
        return self.eps1 + self.eps2_weight * self.effective_noise

    @property
    def total(self) -> float:
        """Error on the true parameter vector x = [x_S, x_C]"""
        return self.eps_S + self.eps_C

    @property
    def eps_F(self) -> float:
        return self.fake_leak + self.fake_amplification * self.effective_noise
