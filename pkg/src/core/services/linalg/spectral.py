"""
Thin SVD helpers and the shrinkage inverse built on them.
"""

from dataclasses import dataclass

import numpy as np

from src.core.errors import InvalidInputError


@dataclass(frozen=True, eq=False)
class ThinSvd:
    """Economy SVD M = U diag(s) Vt with U (n x k), s (k,), Vt (k x p), k = min(n, p)"""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    shape: tuple

    @property
    def cutoff(self) -> float:
        """Singular values at or below this are numerically zero"""
        if self.s.size == 0:
            return 0.0
        return float(max(self.shape) * np.finfo(float).eps * self.s[0])

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.s > self.cutoff))


def thin_svd(matrix: np.ndarray) -> ThinSvd:
    """Economy SVD that also accepts zero-width or zero-height matrices."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {matrix.shape}")
    n, p = matrix.shape
    if min(n, p) == 0:
        return ThinSvd(u=np.zeros((n, 0)), s=np.zeros(0), vt=np.zeros((0, p)), shape=(n, p))
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    return ThinSvd(u=u, s=s, vt=vt, shape=(n, p))


def shrinkage_factors(svd: ThinSvd, sigma_hat2: float) -> np.ndarray:
    """
    Diagonal of the shrinkage inverse: s / (s^2 + sigma_hat2).

    At sigma_hat2 = 0 this is the pseudoinverse, so singular values under the
    rank cutoff map to zero instead of 1/s.
    """
    s = svd.s
    if sigma_hat2 == 0.0:
        factors = np.zeros_like(s)
        keep = s > svd.cutoff
        factors[keep] = 1.0 / s[keep]
        return factors
    return s / (s * s + sigma_hat2)


def shrinkage_inverse(svd: ThinSvd, sigma_hat2: float) -> np.ndarray:
    """V diag(s / (s^2 + sigma_hat2)) U^T, shape (p, n)."""
    factors = shrinkage_factors(svd, sigma_hat2)
    return (svd.vt.T * factors) @ svd.u.T


def pinv_gram_trace(svd: ThinSvd) -> float:
    """tr((M^T M)^+) = sum over nonzero singular values of 1/s^2."""
    s = svd.s[svd.s > svd.cutoff]
    return float(np.sum(1.0 / (s * s)))
