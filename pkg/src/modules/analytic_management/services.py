"""
Closed-form MSE expressions for the misspecified LMMSE estimator.

All functions take the dimensions and the prior powers tr(K_x_S), tr(K_x_C)
rather than matrices: the expected errors depend on the priors only through
their traces.
"""

import math
from typing import Optional

from src.core.errors import InvalidInputError, NearThresholdError, UnsupportedError
from src.core.settings.logging import logger
from src.modules.analytic_management.schema import (
    FakeCountOptimum,
    MomentMethod,
    MseBreakdown,
    Regime,
    SpectralMoments,
)

# the large-n moment approximation is only trusted above this n / p_bar
LARGE_N_RATIO = 10


def _check_counts(**counts: int) -> None:
    for name, value in counts.items():
        if int(value) != value or value < 0:
            raise InvalidInputError(f"{name} must be a non-negative integer, got {value}")


def _check_powers(**powers: float) -> None:
    for name, value in powers.items():
        if not math.isfinite(value) or value < 0:
            raise InvalidInputError(f"{name} must be finite and non-negative, got {value}")


def classify_regime(n: int, p_bar: int) -> Regime:
    """Under if n > p_bar + 1, over if p_bar > n + 1, near threshold otherwise."""
    if p_bar == 0 or n > p_bar + 1:
        return Regime.UNDER
    if p_bar > n + 1:
        return Regime.OVER
    return Regime.NEAR_THRESHOLD


def _shared_error_min_norm(p_S: int, p_F: int, n: int, trace_x_S: float, effective_noise: float) -> float:
    p_bar = p_S + p_F
    if p_S == 0:
        return 0.0
    if n > p_bar + 1:
        return p_S / (n - p_bar - 1) * effective_noise
    amplification = n * p_S / (p_bar * (p_bar - n - 1)) * effective_noise
    retained = 1.0 - n / p_bar - p_F * n * (p_bar - n) / ((p_bar - 1) * p_bar * (p_bar + 2))
    return amplification + retained * trace_x_S


def mse_min_norm(
    p_S: int, p_F: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float
) -> MseBreakdown:
    """
    Expected MSE of the minimum-norm (sigma_hat2 = 0) misspecified estimator.

    Gaussian i.i.d. features, any prior covariances with the given traces.
    Near the interpolation threshold (|n - p_bar| <= 1) the expectation does
    not exist and the breakdown comes back with eps = None.

    Args:
        p_S: Shared parameters
        p_F: Fake parameters
        n: Observations
        trace_x_S: tr(K_x_S)
        trace_x_C: tr(K_x_C)
        sigma_v2: True noise variance

    Returns:
        MseBreakdown with eps, eps_S and eps_C
    """
    _check_counts(p_S=p_S, p_F=p_F, n=n)
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C, sigma_v2=sigma_v2)
    if n < 1:
        raise InvalidInputError("n must be at least 1")

    p_bar = p_S + p_F
    regime = classify_regime(n, p_bar)
    if regime == Regime.NEAR_THRESHOLD:
        return MseBreakdown(eps_C=trace_x_C, regime=regime, formula_id="near-threshold")

    eps_S = _shared_error_min_norm(p_S, p_F, n, trace_x_S, trace_x_C + sigma_v2)
    return MseBreakdown(
        eps=eps_S + trace_x_C,
        eps_S=eps_S,
        eps_C=trace_x_C,
        regime=regime,
        formula_id=f"min-norm-{regime.value}",
    )


def mse_limit_pf_infinity(trace_x_S: float, trace_x_C: float = 0.0) -> float:
    """Minimum-norm error as p_F grows without bound: the whole prior power tr(K_x)."""
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C)
    return trace_x_S + trace_x_C


def pf_infinity_threshold(p_S: int, n: int, trace_x: float, sigma_v2: float) -> float:
    """
    Largest known-power fraction r for which infinitely many fake features beat none.

    Args:
        p_S: Shared parameters
        n: Observations
        trace_x: Total prior power tr(K_x)
        sigma_v2: True noise variance

    Returns:
        Threshold on r = tr(K_x_S) / tr(K_x)
    """
    _check_counts(p_S=p_S, n=n)
    _check_powers(trace_x=trace_x, sigma_v2=sigma_v2)
    if trace_x <= 0:
        raise InvalidInputError("trace_x must be positive")
    ratio = (trace_x + sigma_v2) / trace_x
    if n >= p_S and n > 1:
        return p_S / (n - 1) * ratio
    if n < p_S:
        return p_S / (2 * p_S - n - 1) * ratio
    raise UnsupportedError(f"no threshold for n={n}, p_S={p_S}")


def pf_infinity_beats_pf_zero(p_S: int, n: int, r: float, trace_x: float, sigma_v2: float) -> bool:
    """
    True when letting p_F grow without bound gives lower error than p_F = 0.

    The comparison assumes the prior power splits as tr(K_x_S) = r tr(K_x).
    """
    if not math.isfinite(r) or not 0.0 <= r <= 1.0:
        raise InvalidInputError(f"r must lie in [0, 1], got {r}")
    return r < pf_infinity_threshold(p_S, n, trace_x, sigma_v2)


def mse_fake(p_S: int, p_F: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float) -> float:
    """Expected energy the minimum-norm estimator puts on the fake parameters."""
    _check_counts(p_S=p_S, p_F=p_F, n=n)
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C, sigma_v2=sigma_v2)
    p_bar = p_S + p_F
    if p_F == 0:
        return 0.0
    regime = classify_regime(n, p_bar)
    if regime == Regime.NEAR_THRESHOLD:
        raise NearThresholdError(n, p_bar, "fake-feature error")
    effective_noise = trace_x_C + sigma_v2
    if regime == Regime.UNDER:
        return p_F / (n - p_bar - 1) * effective_noise
    amplification = n * p_F / (p_bar * (p_bar - n - 1)) * effective_noise
    leak = n * p_F * (p_bar - n) / ((p_bar - 1) * p_bar * (p_bar + 2)) * trace_x_S
    return amplification + leak


def mse_output(p_bar: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float) -> float:
    """Expected squared error of predicting a fresh response with the minimum-norm estimator."""
    _check_counts(p_bar=p_bar, n=n)
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C, sigma_v2=sigma_v2)
    regime = classify_regime(n, p_bar)
    if regime == Regime.NEAR_THRESHOLD:
        raise NearThresholdError(n, p_bar, "output error")
    effective_noise = trace_x_C + sigma_v2
    if regime == Regime.UNDER:
        if p_bar == 0:
            return trace_x_S + effective_noise
        return p_bar / (n - p_bar - 1) * effective_noise + effective_noise
    return n / (p_bar - n - 1) * effective_noise + (1 - n / p_bar) * trace_x_S + effective_noise


def analytic_breakdown(
    p_S: int, p_F: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float
) -> MseBreakdown:
    """Every minimum-norm closed form of one design point in a single breakdown."""
    base = mse_min_norm(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2)
    if not base.defined:
        return base
    return base.model_copy(
        update={
            "eps_F": mse_fake(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2),
            "eps_y": mse_output(p_S + p_F, n, trace_x_S, trace_x_C, sigma_v2),
        }
    )


def mse_ridge(
    p_S: int,
    p_F: int,
    n: int,
    trace_x_S: float,
    trace_x_C: float,
    sigma_v2: float,
    moments: SpectralMoments,
) -> MseBreakdown:
    """
    Expected MSE for any assumed noise variance, given the spectral moments.

    Moment standard errors are propagated linearly into eps_stderr.
    """
    _check_counts(p_S=p_S, p_F=p_F, n=n)
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C, sigma_v2=sigma_v2)
    p_bar = p_S + p_F
    if p_bar <= 1:
        raise UnsupportedError(f"ridge error expression needs p_bar > 1, got {p_bar}")
    if moments.n != n or moments.p_bar != p_bar:
        raise InvalidInputError(
            f"moments were computed for (n={moments.n}, p_bar={moments.p_bar}), not (n={n}, p_bar={p_bar})"
        )
    if moments.method == MomentMethod.SAMPLED and moments.p_S != p_S:
        raise InvalidInputError(f"sampled moments were weighted for p_S={moments.p_S}, not {p_S}")

    noise_weight = (trace_x_C + sigma_v2) * p_S / p_bar
    eps_S = noise_weight * moments.mu1 + moments.mu2 * trace_x_S

    stderr: Optional[float] = None
    if moments.stderr1 is not None and moments.stderr2 is not None:
        stderr = abs(noise_weight) * moments.stderr1 + trace_x_S * moments.stderr2

    return MseBreakdown(
        eps=eps_S + trace_x_C,
        eps_S=eps_S,
        eps_C=trace_x_C,
        eps_stderr=stderr,
        regime=classify_regime(n, p_bar),
        formula_id=f"ridge-{moments.method.value.replace('_', '-')}",
    )


def moments_large_n(p_bar: int, n: int, sigma_hat2: float) -> SpectralMoments:
    """Spectral moments when every Gram eigenvalue sits near n."""
    _check_counts(p_bar=p_bar, n=n)
    _check_powers(sigma_hat2=sigma_hat2)
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    flagged = n < LARGE_N_RATIO * p_bar
    if flagged:
        logger.warning(f"large-n moment approximation used with n={n} < {LARGE_N_RATIO}*p_bar={LARGE_N_RATIO * p_bar}")
    denom = (n + sigma_hat2) ** 2
    return SpectralMoments(
        mu1=n * p_bar / denom,
        mu2=sigma_hat2 * sigma_hat2 / denom,
        method=MomentMethod.LARGE_N,
        n=n,
        p_bar=p_bar,
        sigma_hat2=sigma_hat2,
        flagged=flagged,
    )


def mse_large_n(
    p_S: int, p_F: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float, sigma_hat2: float
) -> MseBreakdown:
    """Ridge error expression evaluated with the large-n moments."""
    return mse_ridge(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2, moments_large_n(p_S + p_F, n, sigma_hat2))


def optimal_sigma_hat(p_S: int, trace_x_S: float, trace_x_C: float, sigma_v2: float) -> float:
    """
    Assumed noise variance minimizing the error without fake features.

    Returns:
        sigma_hat2* = p_S (tr(K_x_C) + sigma_v2) / tr(K_x_S)
    """
    _check_counts(p_S=p_S)
    _check_powers(trace_x_S=trace_x_S, trace_x_C=trace_x_C, sigma_v2=sigma_v2)
    if trace_x_S == 0:
        raise InvalidInputError("optimal assumed noise is undefined when tr(K_x_S) = 0")
    return p_S * (trace_x_C + sigma_v2) / trace_x_S


def optimal_fake_count(
    p_S: int, n: int, trace_x_S: float, trace_x_C: float, sigma_v2: float, pf_max: int
) -> FakeCountOptimum:
    """Scan p_F = 0..pf_max for the best minimum-norm error, skipping the threshold band."""
    _check_counts(pf_max=pf_max)
    best_global: Optional[tuple] = None
    best_local: Optional[tuple] = None
    eps_at_zero: Optional[float] = None

    for p_F in range(pf_max + 1):
        breakdown = mse_min_norm(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2)
        if not breakdown.defined:
            continue
        eps = float(breakdown.eps)  # type: ignore[arg-type]
        if p_F == 0:
            eps_at_zero = eps
        if best_global is None or eps < best_global[1]:
            best_global = (p_F, eps)
        if breakdown.regime == Regime.OVER and (best_local is None or eps < best_local[1]):
            best_local = (p_F, eps)

    if best_global is None:
        raise InvalidInputError(f"no defined error for p_F in 0..{pf_max}")
    return FakeCountOptimum(
        local_min_pf=best_local[0] if best_local else None,
        local_min_eps=best_local[1] if best_local else None,
        global_min_pf=best_global[0],
        global_min_eps=best_global[1],
        eps_at_zero=eps_at_zero,
        limit=mse_limit_pf_infinity(trace_x_S, trace_x_C),
        pf_max=pf_max,
    )
