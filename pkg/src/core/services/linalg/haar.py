"""
Haar-distributed orthogonal matrices.

QR of a standard Gaussian matrix is Haar only after the signs of R's diagonal
are folded back into Q; without that fix the law depends on the QR routine.
"""

import numpy as np

from src.core.errors import InvalidInputError


def sample_haar_batch(count: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw `count` independent Haar orthogonal matrices.

    Args:
        count: Number of matrices
        dim: Matrix dimension
        rng: Source of randomness

    Returns:
        Array of shape (count, dim, dim)
    """
    if count < 0 or dim < 0:
        raise InvalidInputError(f"count and dim must be non-negative, got count={count}, dim={dim}")
    if count == 0 or dim == 0:
        return np.zeros((count, dim, dim))
    gaussian = rng.standard_normal((count, dim, dim))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def sample_haar(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one Haar orthogonal matrix of size dim x dim."""
    return sample_haar_batch(1, dim, rng)[0]
