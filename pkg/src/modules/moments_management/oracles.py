"""
Sampling oracles for the random-matrix identities.

Every oracle draws in fixed-size batches, batch b from streams.generator(b),
and folds batch statistics into a RunningMoments accumulator so memory stays
flat however many draws are requested.
"""

from typing import Iterator, List, Optional, Tuple

import numpy as np
import scipy.stats

from src.core.errors import InvalidInputError
from src.core.services.linalg import sample_haar_batch
from src.core.services.random import StreamFactory
from src.core.services.stats import RunningMoments
from src.core.settings.config import settings
from src.modules.moments_management.schema import DistributionCheck, HaarFourthMoments, OracleCheck
from src.modules.moments_management.services import (
    expected_pinv_gram_trace,
    gaussian_sandwich_trace,
    haar_fourth_moments,
    q_expectation,
)


def _batches(draws: int, batch_size: Optional[int]) -> Iterator[Tuple[int, int]]:
    if draws < 2:
        raise InvalidInputError(f"an oracle needs at least 2 draws, got {draws}")
    size = batch_size or settings.moment_batch_size
    for index, start in enumerate(range(0, draws, size)):
        yield index, min(size, draws - start)


def _offdiagonal_mean(stack: np.ndarray) -> np.ndarray:
    dim = stack.shape[-1]
    total = stack.sum(axis=(-2, -1))
    diag = np.trace(stack, axis1=-2, axis2=-1)
    return (total - diag) / (dim * (dim - 1))


def _diagonal_mean(stack: np.ndarray) -> np.ndarray:
    return np.trace(stack, axis1=-2, axis2=-1) / stack.shape[-1]


def oracle_pinv_gram_trace(
    n: int, p_bar: int, draws: int, streams: StreamFactory, tolerance: float = 3.0, batch_size: Optional[int] = None
) -> OracleCheck:
    """Sampled tr((A^T A)^+) against its inverse-Wishart expectation."""
    expected = expected_pinv_gram_trace(n, p_bar)
    acc = RunningMoments()
    for index, size in _batches(draws, batch_size):
        rng = streams.generator(index)
        s = np.linalg.svd(rng.standard_normal((size, n, p_bar)), compute_uv=False)
        acc.update(np.sum(1.0 / np.square(s), axis=1))
    return OracleCheck.compare(
        f"pinv_gram_trace(n={n},p_bar={p_bar})", float(acc.mean), expected, float(acc.stderr), tolerance, acc.count
    )


def haar_entry_statistics(V: np.ndarray) -> np.ndarray:
    """
    Per-matrix averages estimating (m4, m22, m_cross) for a stack of p x p matrices.

    Computed by inclusion-exclusion over index coincidences without assuming
    orthogonality, so a broken sampler shows up in the statistics.
    """
    p = V.shape[-1]
    sq = np.square(V)
    fourth = np.square(sq)
    row_sq = sq.sum(axis=2)
    col_sq = sq.sum(axis=1)
    fourth_total = fourth.sum(axis=(1, 2))

    m4 = fourth_total / (p * p)
    m22 = (np.square(row_sq).sum(axis=1) - fourth_total) / (p * p * (p - 1))

    gram = np.einsum("bil,bik->blk", V, V)
    all_terms = np.square(gram).sum(axis=(1, 2))
    cross_sum = all_terms - np.square(row_sq).sum(axis=1) - np.square(col_sq).sum(axis=1) + fourth_total
    m_cross = cross_sum / (p * (p - 1)) ** 2
    return np.column_stack([m4, m22, m_cross])


def oracle_haar_fourth_moments(
    p: int,
    draws: int,
    streams: StreamFactory,
    tolerance: float = 3.0,
    expected: Optional[HaarFourthMoments] = None,
    batch_size: Optional[int] = None,
) -> List[OracleCheck]:
    """Sampled Haar fourth moments against the closed forms."""
    expected = expected or haar_fourth_moments(p)
    acc = RunningMoments(3)
    for index, size in _batches(draws, batch_size):
        acc.update(haar_entry_statistics(sample_haar_batch(size, p, streams.generator(index))))
    names = ("m4", "m22", "m_cross")
    targets = (expected.m4, expected.m22, expected.m_cross)
    return [
        OracleCheck.compare(
            f"haar_{name}(p={p})", float(acc.mean[k]), target, float(acc.stderr[k]), tolerance, acc.count
        )
        for k, (name, target) in enumerate(zip(names, targets))
    ]


def oracle_q_expectation(
    n: int, p: int, p_S: int, draws: int, streams: StreamFactory, tolerance: float = 3.0, batch_size: Optional[int] = None
) -> List[OracleCheck]:
    """Sampled projector blocks: diagonal of Q, off-diagonal of Q, diagonal of Q_bar."""
    expected = q_expectation(n, p, p_S)
    if p_S < 2 or p_S == p:
        raise InvalidInputError("the projector oracle needs 2 <= p_S < p")
    acc = RunningMoments(3)
    for index, size in _batches(draws, batch_size):
        rng = streams.generator(index)
        _, _, vt = np.linalg.svd(rng.standard_normal((size, n, p)), full_matrices=False)
        projector = np.einsum("bki,bkj->bij", vt, vt)
        P_SS = projector[:, :p_S, :p_S]
        P_SF = projector[:, :p_S, p_S:]
        Q = P_SS @ P_SS
        Q_bar = P_SF @ np.swapaxes(P_SF, 1, 2)
        acc.update(np.column_stack([_diagonal_mean(Q), _offdiagonal_mean(Q), _diagonal_mean(Q_bar)]))

    label = f"(n={n},p={p},p_S={p_S})"
    targets = (("q_diag", expected.mu_q), ("q_offdiag", 0.0), ("qbar_diag", expected.mu_qbar))
    return [
        OracleCheck.compare(f"{name}{label}", float(acc.mean[k]), target, float(acc.stderr[k]), tolerance, acc.count)
        for k, (name, target) in enumerate(targets)
    ]


def oracle_gaussian_sandwich(
    K: np.ndarray, n: int, draws: int, streams: StreamFactory, tolerance: float = 3.0, batch_size: Optional[int] = None
) -> List[OracleCheck]:
    """Sampled A K A^T against tr(K) I: pooled diagonal and off-diagonal means."""
    expected = gaussian_sandwich_trace(K, n)
    K = np.asarray(K, dtype=float)
    p = K.shape[0]
    acc = RunningMoments(2)
    for index, size in _batches(draws, batch_size):
        A = streams.generator(index).standard_normal((size, n, p))
        sandwich = np.einsum("bip,pq,bjq->bij", A, K, A)
        acc.update(np.column_stack([_diagonal_mean(sandwich), _offdiagonal_mean(sandwich)]))
    return [
        OracleCheck.compare(f"sandwich_diag(n={n})", float(acc.mean[0]), expected.coefficient,
                            float(acc.stderr[0]), tolerance, acc.count),
        OracleCheck.compare(f"sandwich_offdiag(n={n})", float(acc.mean[1]), 0.0,
                            float(acc.stderr[1]), tolerance, acc.count),
    ]


def haar_orthogonality_error(samples: np.ndarray) -> float:
    """max |Q^T Q - I| over a stack of matrices."""
    p = samples.shape[-1]
    gram = np.einsum("bki,bkj->bij", samples, samples)
    return float(np.max(np.abs(gram - np.eye(p))))


def haar_first_column_chi2(
    p: int, draws: int, streams: StreamFactory, bins: int = 10, alpha: float = 0.01, batch_size: Optional[int] = None
) -> DistributionCheck:
    """
    Chi-square test that the first coordinate of the first column is uniform-on-sphere.

    The signed coordinate q is mapped through its exact CDF
    F(q) = (1 + sign(q) I(q^2; 1/2, (p-1)/2)) / 2, which is uniform under the
    Haar law, then counted in equiprobable bins.
    """
    if p < 2:
        raise InvalidInputError(f"need p >= 2, got {p}")
    counts = np.zeros(bins, dtype=np.int64)
    total = 0
    for index, size in _batches(draws, batch_size):
        q = sample_haar_batch(size, p, streams.generator(index))[:, 0, 0]
        u = 0.5 * (1.0 + np.sign(q) * scipy.stats.beta.cdf(q * q, 0.5, 0.5 * (p - 1)))
        counts += np.bincount(np.minimum((u * bins).astype(int), bins - 1), minlength=bins)
        total += size
    statistic, p_value = scipy.stats.chisquare(counts)
    return DistributionCheck(
        name=f"haar_first_column(p={p})",
        statistic=float(statistic),
        p_value=float(p_value),
        alpha=alpha,
        draws=total,
        passed=bool(p_value > alpha),
    )
