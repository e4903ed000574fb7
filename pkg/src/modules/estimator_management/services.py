"""
Misspecified and oracle LMMSE estimators and their conditional errors.
"""

from typing import Optional

import numpy as np
import scipy.linalg

from src.core.errors import InvalidInputError
from src.core.services.linalg import shrinkage_inverse
from src.modules.estimator_management.schema import ConditionalMse, Estimate, MisspecifiedEstimator, SolveRoute
from src.modules.model_management.schema import FeatureSet


def _check_sigma_hat2(sigma_hat2: float) -> float:
    if not np.isfinite(sigma_hat2) or sigma_hat2 < 0:
        raise InvalidInputError(f"sigma_hat2 must be finite and non-negative, got {sigma_hat2}")
    return float(sigma_hat2)


def _check_square(name: str, matrix: np.ndarray, dim: int) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (dim, dim):
        raise InvalidInputError(f"{name} must be {dim}x{dim}, got {matrix.shape}")
    return matrix


def build_misspecified(features: FeatureSet, sigma_hat2: float) -> MisspecifiedEstimator:
    """
    Misspecified LMMSE matrix under the identity prior on [x_S, x_F].

    Computed from the cached SVD as V diag(s / (s^2 + sigma_hat2)) U^T, which at
    sigma_hat2 = 0 is the Moore-Penrose pseudoinverse of A_bar.

    Args:
        features: Feature realization (A_S, A_C, A_F)
        sigma_hat2: Assumed noise variance, >= 0

    Returns:
        MisspecifiedEstimator of shape p_bar x n
    """
    sigma_hat2 = _check_sigma_hat2(sigma_hat2)
    W_bar = shrinkage_inverse(features.svd, sigma_hat2)
    return MisspecifiedEstimator(W_bar=W_bar, p_S=features.p_S, p_C=features.p_C, sigma_hat2=sigma_hat2)


def build_misspecified_direct(features: FeatureSet, sigma_hat2: float, route: SolveRoute) -> MisspecifiedEstimator:
    """Same estimator through an explicit positive-definite solve (sigma_hat2 > 0 only)."""
    sigma_hat2 = _check_sigma_hat2(sigma_hat2)
    if sigma_hat2 == 0:
        raise InvalidInputError("direct solve routes need sigma_hat2 > 0")
    A = features.A_bar
    n, p_bar = A.shape
    if route == SolveRoute.OBSERVATION_SPACE:
        gram = A @ A.T + sigma_hat2 * np.eye(n)
        W_bar = scipy.linalg.solve(gram, A, assume_a="pos").T
    else:
        gram = A.T @ A + sigma_hat2 * np.eye(p_bar)
        W_bar = scipy.linalg.solve(gram, A.T, assume_a="pos")
    return MisspecifiedEstimator(W_bar=W_bar, p_S=features.p_S, p_C=features.p_C, sigma_hat2=sigma_hat2)


def build_misspecified_general(
    features: FeatureSet, prior_covariance: np.ndarray, sigma_hat2: float
) -> MisspecifiedEstimator:
    """LMMSE matrix for an arbitrary assumed prior K_hat on [x_S, x_F]."""
    sigma_hat2 = _check_sigma_hat2(sigma_hat2)
    A = features.A_bar
    K = _check_square("prior_covariance", prior_covariance, A.shape[1])
    if not np.allclose(K, K.T):
        raise InvalidInputError("prior_covariance must be symmetric")
    gram = A @ K @ A.T + sigma_hat2 * np.eye(A.shape[0])
    W_bar = K @ A.T @ np.linalg.pinv(gram, hermitian=True)
    return MisspecifiedEstimator(W_bar=W_bar, p_S=features.p_S, p_C=features.p_C, sigma_hat2=sigma_hat2)


def build_oracle(features: FeatureSet, K_x: np.ndarray, sigma_v2: float) -> np.ndarray:
    """
    Oracle LMMSE matrix that knows the true model matrix and priors.

    Args:
        features: Feature realization; the oracle uses A_tilde = [A_S, A_C]
        K_x: True prior covariance of [x_S, x_C], p x p
        sigma_v2: True noise variance

    Returns:
        W_O of shape p x n
    """
    A = features.A_tilde
    K_x = _check_square("K_x", K_x, A.shape[1])
    if not np.isfinite(sigma_v2) or sigma_v2 < 0:
        raise InvalidInputError(f"sigma_v2 must be finite and non-negative, got {sigma_v2}")
    gram = A @ K_x @ A.T + sigma_v2 * np.eye(A.shape[0])
    return K_x @ A.T @ np.linalg.pinv(gram, hermitian=True)


def estimate(estimator: MisspecifiedEstimator, y: np.ndarray) -> Estimate:
    """Apply W_bar to one observation vector (n,) or a batch of rows (count, n)."""
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != estimator.n:
        raise InvalidInputError(f"observation length {y.shape[-1]} does not match n={estimator.n}")
    x_bar_hat = y @ estimator.W_bar.T
    zeros_shape = y.shape[:-1] + (estimator.p_C,)
    return Estimate(
        x_S_hat=x_bar_hat[..., : estimator.p_S],
        x_F_hat=x_bar_hat[..., estimator.p_S :],
        x_C_hat=np.zeros(zeros_shape),
    )


def conditional_mse(
    estimator: MisspecifiedEstimator,
    features: FeatureSet,
    K_x_S: np.ndarray,
    trace_x_C: float,
    sigma_v2: float,
) -> ConditionalMse:
    """
    Error decomposition for a fixed assumed feature matrix.

    Args:
        estimator: Misspecified estimator built from `features`
        features: The feature realization
        K_x_S: Prior covariance of x_S (p_S x p_S)
        trace_x_C: Power of the missing parameters, tr(K_x_C)
        sigma_v2: True noise variance

    Returns:
        ConditionalMse with the shared and fake-feature terms
    """
    p_S = features.p_S
    K_x_S = _check_square("K_x_S", K_x_S, p_S)
    if estimator.p_S != p_S or estimator.n != features.n:
        raise InvalidInputError("estimator and features disagree on dimensions")

    W_S, W_F, A_S = estimator.W_S, estimator.W_F, features.A_S
    residual = np.eye(p_S) - W_S @ A_S
    leak = W_F @ A_S

    return ConditionalMse(
        eps1=float(np.einsum("ij,jk,ik->", residual, K_x_S, residual)),
        eps2_weight=float(np.sum(W_S * W_S)),
        eps_C=float(trace_x_C),
        fake_leak=float(np.einsum("ij,jk,ik->", leak, K_x_S, leak)),
        fake_amplification=float(np.sum(W_F * W_F)),
        sigma_v2=float(sigma_v2),
    )


def oracle_conditional_mse(W_O: np.ndarray, features: FeatureSet, K_x: np.ndarray, sigma_v2: float) -> float:
    """tr((I - W_O A) K_x (I - W_O A)^T) + sigma_v2 tr(W_O W_O^T)"""
    A = features.A_tilde
    K_x = _check_square("K_x", K_x, A.shape[1])
    residual = np.eye(A.shape[1]) - W_O @ A
    return float(np.einsum("ij,jk,ik->", residual, K_x, residual) + sigma_v2 * np.sum(W_O * W_O))


def conditional_prediction_mse(
    estimator: MisspecifiedEstimator,
    features: FeatureSet,
    test_features: FeatureSet,
    K_x_S: np.ndarray,
    K_x_C: Optional[np.ndarray],
    sigma_v2: float,
) -> float:
    """
    Mean squared error of predicting fresh responses at held-out rows.

    The expectation over unknowns and noise is taken in closed form for each
    test row; like conditional_mse, A_C is averaged out of the training side.
    """
    trace_x_C = float(np.trace(K_x_C)) if K_x_C is not None and K_x_C.size else 0.0
    B = test_features.A_bar @ estimator.W_bar
    G_S = test_features.A_S - B @ features.A_S
    per_row = np.einsum("ti,ij,tj->t", G_S, K_x_S, G_S)
    if K_x_C is not None and K_x_C.size:
        per_row = per_row + np.einsum("ti,ij,tj->t", test_features.A_C, K_x_C, test_features.A_C)
    per_row = per_row + (trace_x_C + sigma_v2) * np.sum(B * B, axis=1) + sigma_v2
    return float(per_row.mean())
