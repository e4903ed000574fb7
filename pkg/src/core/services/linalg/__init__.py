"""
Linear-algebra services: Haar sampling and SVD-based inverses.
"""

from .haar import sample_haar, sample_haar_batch
from .spectral import ThinSvd, pinv_gram_trace, shrinkage_factors, shrinkage_inverse, thin_svd

__all__ = [
    "ThinSvd",
    "pinv_gram_trace",
    "sample_haar",
    "sample_haar_batch",
    "shrinkage_factors",
    "shrinkage_inverse",
    "thin_svd",
]
