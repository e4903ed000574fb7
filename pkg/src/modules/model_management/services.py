"""
Sampling services for the linear measurement model.
Materializes covariances, draws feature blocks and unknowns, and forms observations.
"""

from typing import Optional

import numpy as np

from src.core.errors import InvalidInputError, InvalidSpecError
from src.core.services.linalg import sample_haar
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.settings.logging import logger
from src.modules.model_management.schema import (
    CovarianceKind,
    CovarianceSpec,
    FeatureCovariance,
    FeatureSet,
    MaterializedCovariance,
    Priors,
    ProblemConfig,
    UnknownsDraw,
)

# smallest eigenvalue must exceed -PD_TOLERANCE * largest
PD_TOLERANCE = 1e-12


def decayed_spectrum(dim: int, alpha: float) -> np.ndarray:
    """Eigenvalues i^alpha, i = 1..dim, rescaled to sum to dim."""
    log_lam = alpha * np.log(np.arange(1, dim + 1, dtype=float))
    lam = np.exp(log_lam - log_lam.max())
    return lam * (dim / lam.sum())


def validate_covariance_spec(spec: CovarianceSpec, dim: int) -> None:
    """Raise InvalidSpecError when `spec` cannot be materialized at `dim`."""
    if dim <= 0:
        raise InvalidSpecError(f"covariance dimension must be positive, got {dim}")
    if spec.kind == CovarianceKind.ISOTROPIC:
        if not np.isfinite(spec.scale) or spec.scale <= 0:
            raise InvalidSpecError(f"isotropic scale must be finite and positive, got {spec.scale}")
    elif not np.isfinite(spec.alpha):
        raise InvalidSpecError(f"decay exponent must be finite, got {spec.alpha}")
    if spec.seed is not None and spec.seed < 0:
        raise InvalidSpecError(f"rotation seed must be non-negative, got {spec.seed}")


def materialize_covariance(
    spec: CovarianceSpec, dim: int, rng: Optional[np.random.Generator] = None
) -> MaterializedCovariance:
    """
    Produce the dense covariance matrix of `spec` at dimension `dim`.

    Args:
        spec: Covariance family and parameters
        dim: Matrix dimension (positive)
        rng: Stream for the Haar rotation when spec.seed is None

    Returns:
        MaterializedCovariance with matrix, square-root factor and eigenvalues
    """
    validate_covariance_spec(spec, dim)

    if spec.kind == CovarianceKind.ISOTROPIC:
        scale = float(spec.scale)
        return MaterializedCovariance(
            matrix=scale * np.eye(dim),
            factor=np.sqrt(scale) * np.eye(dim),
            eigenvalues=np.full(dim, scale),
        )

    if spec.seed is not None:
        rng = StreamFactory(spec.seed).generator(StreamPurpose.COVARIANCE, dim)
    elif rng is None:
        raise InvalidSpecError("decayed_eigen covariance needs a rotation seed or a random stream")

    lam = decayed_spectrum(dim, spec.alpha)
    logger.debug(f"materializing decayed_eigen covariance dim={dim} alpha={spec.alpha:g}")
    rotation = sample_haar(dim, rng)
    matrix = (rotation * lam) @ rotation.T
    matrix = 0.5 * (matrix + matrix.T)

    eig = np.linalg.eigvalsh(matrix)
    if eig[0] <= -PD_TOLERANCE * eig[-1]:
        raise InvalidSpecError(f"materialized covariance is not positive semi-definite (min eigenvalue {eig[0]:.3e})")

    return MaterializedCovariance(
        matrix=matrix,
        factor=rotation * np.sqrt(lam),
        eigenvalues=np.sort(lam)[::-1],
    )


def _materialize_or_empty(spec: CovarianceSpec, dim: int, rng: Optional[np.random.Generator]) -> MaterializedCovariance:
    if dim == 0:
        return MaterializedCovariance.empty()
    return materialize_covariance(spec, dim, rng)


def materialize_priors(config: ProblemConfig, rng: Optional[np.random.Generator] = None) -> Priors:
    """Materialize K_x_S and K_x_C; zero-width blocks give empty matrices."""
    return Priors(
        K_x_S=_materialize_or_empty(config.cov_x_S, config.p_S, rng),
        K_x_C=_materialize_or_empty(config.cov_x_C, config.p_C, rng),
    )


class FeatureFactors:
    """Square-root factors of the feature row covariances, fixed for one experiment"""

    def __init__(self, config: ProblemConfig, feature_cov: FeatureCovariance, rng: Optional[np.random.Generator] = None):
        self.shared = _materialize_or_empty(feature_cov.shared, config.p, rng)
        self.fake = _materialize_or_empty(feature_cov.fake, config.p_F, rng)


def _gaussian_rows(rng: np.random.Generator, rows: int, factor: Optional[MaterializedCovariance], dim: int) -> np.ndarray:
    z = rng.standard_normal((rows, dim))
    if factor is None or dim == 0:
        return z
    return z @ factor.factor.T


def sample_features(
    config: ProblemConfig,
    rng: np.random.Generator,
    feature_cov: Optional[FeatureCovariance] = None,
    factors: Optional[FeatureFactors] = None,
    rows: Optional[int] = None,
) -> FeatureSet:
    """
    Draw one realization of A_S, A_C and A_F.

    Rows of [A_S, A_C] are N(0, K_a) and rows of A_F are N(0, K_aF); both are
    standard Gaussian when no feature covariance is given. `rows` overrides
    config.n (held-out test rows).
    """
    if factors is None and feature_cov is not None and not feature_cov.is_isotropic_identity:
        factors = FeatureFactors(config, feature_cov, rng)

    rows = config.n if rows is None else rows
    shared = _gaussian_rows(rng, rows, factors.shared if factors else None, config.p)
    fake = _gaussian_rows(rng, rows, factors.fake if factors else None, config.p_F)
    return FeatureSet(A_S=shared[:, : config.p_S], A_C=shared[:, config.p_S :], A_F=fake)


def sample_unknowns_batch(
    config: ProblemConfig, count: int, rng: np.random.Generator, priors: Optional[Priors] = None
) -> UnknownsDraw:
    """Draw `count` independent (x_S, x_C, v) triples as rows."""
    if count < 1:
        raise InvalidInputError(f"count must be positive, got {count}")
    if priors is None:
        priors = materialize_priors(config, rng)

    x_S = rng.standard_normal((count, config.p_S))
    if config.p_S:
        x_S = x_S @ priors.K_x_S.factor.T
    x_C = rng.standard_normal((count, config.p_C))
    if config.p_C:
        x_C = x_C @ priors.K_x_C.factor.T
    v = np.sqrt(config.sigma_v2) * rng.standard_normal((count, config.n))
    return UnknownsDraw(x_S=x_S, x_C=x_C, v=v, batched=True)


def sample_unknowns(config: ProblemConfig, rng: np.random.Generator, priors: Optional[Priors] = None) -> UnknownsDraw:
    """Draw x_S ~ N(0, K_x_S), x_C ~ N(0, K_x_C), v ~ N(0, sigma_v2 I)."""
    batch = sample_unknowns_batch(config, 1, rng, priors)
    return UnknownsDraw(x_S=batch.x_S[0], x_C=batch.x_C[0], v=batch.v[0])


def generate_observations(features: FeatureSet, draw: UnknownsDraw) -> np.ndarray:
    """
    y = A_S x_S + A_C x_C + v.

    Works on a single draw (returns shape (n,)) or a batch (returns (count, n)).
    """
    if draw.x_S.shape[-1] != features.p_S or draw.x_C.shape[-1] != features.p_C or draw.v.shape[-1] != features.n:
        raise InvalidInputError(
            f"dimension mismatch: features (n={features.n}, p_S={features.p_S}, p_C={features.p_C}) vs "
            f"draw (x_S={draw.x_S.shape}, x_C={draw.x_C.shape}, v={draw.v.shape})"
        )
    return draw.x_S @ features.A_S.T + draw.x_C @ features.A_C.T + draw.v


def describe(config: ProblemConfig) -> str:
    """One-line summary used in log messages"""
    return (
        f"p_S={config.p_S} p_C={config.p_C} p_F={config.p_F} n={config.n} "
        f"sigma_v2={config.sigma_v2:g} sigma_hat2={config.sigma_hat2:g}"
    )

