"""
Random-matrix machinery: closed-form identities and sampled spectral moments.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

import numpy as np
import scipy.linalg

from src.core.errors import InvalidInputError, NearThresholdError, UnsupportedError
from src.core.services.random import StreamFactory
from src.core.services.stats import RunningMoments
from src.core.settings.logging import logger
from src.modules.analytic_management.schema import MomentMethod, SpectralMoments
from src.modules.moments_management.schema import (
    HaarFourthMoments,
    QExpectation,
    SandwichExpectation,
    SpectrumSample,
)


def expected_pinv_gram_trace(n: int, p_bar: int) -> float:
    """
    E[tr((A^T A)^+)] for a standard Gaussian n x p_bar matrix A.

    p_bar / (n - p_bar - 1) in the full-column-rank case and
    n / (p_bar - n - 1) in the rank-deficient one.
    """
    if n > p_bar + 1:
        return p_bar / (n - p_bar - 1)
    if p_bar > n + 1:
        return n / (p_bar - n - 1)
    raise NearThresholdError(n, p_bar, "pseudoinverse Gram trace")


def haar_fourth_moments(p: int) -> HaarFourthMoments:
    """Closed-form fourth moments of Haar orthogonal entries (p > 1)."""
    if p <= 1:
        raise UnsupportedError(f"Haar fourth moments need p > 1, got {p}")
    denom = p * (p + 2)
    return HaarFourthMoments(p=p, m4=3.0 / denom, m22=1.0 / denom, m_cross=-1.0 / ((p - 1) * denom))


def q_expectation(n: int, p: int, p_S: int) -> QExpectation:
    """
    Diagonal coefficients of E[Q] and E[Q_bar] for the projector onto the row space of A.

    Needs p > n and p > 1; p_S = p is accepted and gives the fake-free case.
    """
    if not (p > n and p > 1 and 0 <= p_S <= p):
        raise UnsupportedError(f"projector moments need p > n, p > 1, 0 <= p_S <= p (n={n}, p={p}, p_S={p_S})")
    p_F = p - p_S
    cross = n * p_F * (p - n) / ((p - 1) * p * (p + 2))
    return QExpectation(n=n, p=p, p_S=p_S, mu_q=n / p - cross, mu_qbar=cross)


def gaussian_sandwich_trace(K: np.ndarray, n: int) -> SandwichExpectation:
    """E[A K A^T] for standard Gaussian A with n rows: tr(K) times the identity."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInputError(f"K must be square, got shape {K.shape}")
    if not np.allclose(K, K.T, rtol=1e-12, atol=1e-12):
        raise InvalidInputError("K must be symmetric")
    return SandwichExpectation(coefficient=float(np.trace(K)), n=n)


def sample_spectrum(n: int, p_bar: int, rng: np.random.Generator, stream: str = "") -> SpectrumSample:
    """Eigenvalues of A^T A via squared singular values of A, zero-padded to p_bar."""
    if n < 1 or p_bar < 1:
        raise InvalidInputError(f"need n >= 1 and p_bar >= 1, got n={n}, p_bar={p_bar}")
    s = scipy.linalg.svdvals(rng.standard_normal((n, p_bar)))
    eigenvalues = np.zeros(p_bar)
    eigenvalues[: s.size] = s * s
    return SpectrumSample(eigenvalues=eigenvalues, n=n, p_bar=p_bar, stream=stream)


def moment_terms(eigenvalues: np.ndarray, sigma_hat2: float, p_S: int) -> tuple:
    """
    Per-spectrum summands of mu1 and mu2.

    Args:
        eigenvalues: Array (num_spectra, p_bar) of Gram eigenvalues
        sigma_hat2: Assumed noise variance
        p_S: Shared parameters

    Returns:
        (term1, term2), each of shape (num_spectra,)
    """
    eigenvalues = np.atleast_2d(eigenvalues)
    p_bar = eigenvalues.shape[1]
    positive = eigenvalues > 0
    if sigma_hat2 == 0:
        safe = np.where(positive, eigenvalues, 1.0)
        term1 = np.where(positive, 1.0 / safe, 0.0).sum(axis=1)
        shrink = np.where(positive, 0.0, 1.0)
    else:
        term1 = (eigenvalues / np.square(eigenvalues + sigma_hat2)).sum(axis=1)
        shrink = sigma_hat2 / (eigenvalues + sigma_hat2)

    sum_t = shrink.sum(axis=1)
    sum_t2 = np.square(shrink).sum(axis=1)
    pairs = 0.5 * (sum_t * sum_t - sum_t2)
    term2 = ((p_S + 2) * sum_t2 + 2.0 * (p_bar - p_S) / (p_bar - 1) * pairs) / (p_bar * (p_bar + 2))
    return term1, term2


def sample_spectra(
    n: int, p_bar: int, num_spectra: int, streams: StreamFactory, threads: int = 1
) -> List[SpectrumSample]:
    """Draw `num_spectra` spectra, spectrum i from stream i of `streams`."""

    def draw(index: int) -> SpectrumSample:
        return sample_spectrum(n, p_bar, streams.generator(index), streams.label(index))

    if threads <= 1:
        return [draw(i) for i in range(num_spectra)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(draw, range(num_spectra)))


def estimate_moments_grid(
    n: int,
    p_bar: int,
    sigma_hat2_values: Sequence[float],
    p_S: int,
    num_spectra: int,
    streams: StreamFactory,
    threads: int = 1,
) -> List[SpectralMoments]:
    """
    Sampled spectral moments at several assumed noise levels from one set of spectra.

    Args:
        n: Observations
        p_bar: Assumed parameters (> 1)
        sigma_hat2_values: Assumed noise variances, each >= 0
        p_S: Shared parameters, 0 <= p_S <= p_bar
        num_spectra: Spectra to average (>= 2)
        streams: Stream factory; spectrum i uses streams.generator(i)
        threads: Worker threads for spectrum sampling

    Returns:
        One SpectralMoments per entry of sigma_hat2_values
    """
    if num_spectra < 2:
        raise InvalidInputError(f"num_spectra must be at least 2 to estimate a variance, got {num_spectra}")
    if p_bar <= 1:
        raise UnsupportedError(f"spectral moments need p_bar > 1, got {p_bar}")
    if not 0 <= p_S <= p_bar:
        raise InvalidInputError(f"p_S must lie in [0, p_bar], got {p_S}")
    for value in sigma_hat2_values:
        if not np.isfinite(value) or value < 0:
            raise InvalidInputError(f"sigma_hat2 must be finite and non-negative, got {value}")

    spectra = sample_spectra(n, p_bar, num_spectra, streams, threads)
    eigenvalues = np.stack([s.eigenvalues for s in spectra])
    logger.debug(f"sampled {num_spectra} spectra at n={n}, p_bar={p_bar}")

    results = []
    for sigma_hat2 in sigma_hat2_values:
        term1, term2 = moment_terms(eigenvalues, float(sigma_hat2), p_S)
        acc = RunningMoments(2)
        acc.update(np.column_stack([term1, term2]))
        results.append(
            SpectralMoments(
                mu1=float(acc.mean[0]),
                mu2=float(acc.mean[1]),
                stderr1=float(acc.stderr[0]),
                stderr2=float(acc.stderr[1]),
                method=MomentMethod.SAMPLED,
                n=n,
                p_bar=p_bar,
                p_S=p_S,
                sigma_hat2=float(sigma_hat2),
                num_spectra=num_spectra,
            )
        )
    return results


def estimate_moments(
    n: int,
    p_bar: int,
    sigma_hat2: float,
    p_S: int,
    num_spectra: int,
    streams: StreamFactory,
    threads: int = 1,
) -> SpectralMoments:
    """Sampled spectral moments at a single assumed noise level."""
    return estimate_moments_grid(n, p_bar, [sigma_hat2], p_S, num_spectra, streams, threads)[0]


def spectrum_symmetry_error(n: int, p_bar: int, rng: np.random.Generator) -> float:
    """Largest relative gap between the leading eigenvalues of A^T A and A A^T."""
    A = rng.standard_normal((n, p_bar))
    k = min(n, p_bar)
    right = np.sort(np.linalg.eigvalsh(A.T @ A))[::-1][:k]
    left = np.sort(np.linalg.eigvalsh(A @ A.T))[::-1][:k]
    return float(np.max(np.abs(right - left)) / right[0])


def bulk_edge_outlier_fraction(n: int, p_bar: int, delta: float, rng: np.random.Generator) -> float:
    """Fraction of eigenvalues of A^T A / n outside the widened Marchenko-Pastur support."""
    ratio = p_bar / n
    low = (1 - np.sqrt(ratio)) ** 2 - delta
    high = (1 + np.sqrt(ratio)) ** 2 + delta
    eig = sample_spectrum(n, p_bar, rng).eigenvalues[: min(n, p_bar)] / n
    return float(np.mean((eig < low) | (eig > high)))

