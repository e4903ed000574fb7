"""
Self-validation suite.
Runs the sampling oracles of the random-matrix identities, the estimator
identities and a few Monte Carlo smoke cells, and reports a verdict per check.
"""

import time
from typing import Callable, Dict, List, Optional

import numpy as np

from src.core.errors import InvalidInputError
from src.core.services.linalg import sample_haar_batch
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.settings.config import settings
from src.core.settings.logging import logger
from src.modules.analytic_management.schema import Regime
from src.modules.analytic_management.services import classify_regime, mse_fake, mse_min_norm, mse_output
from src.modules.estimator_management.schema import SolveRoute
from src.modules.estimator_management.services import build_misspecified, build_misspecified_direct
from src.modules.model_management.schema import ProblemConfig
from src.modules.model_management.services import sample_features
from src.modules.moments_management.oracles import (
    haar_first_column_chi2,
    haar_orthogonality_error,
    oracle_gaussian_sandwich,
    oracle_haar_fourth_moments,
    oracle_pinv_gram_trace,
    oracle_q_expectation,
)
from src.modules.moments_management.schema import DistributionCheck, OracleCheck
from src.modules.moments_management.services import (
    bulk_edge_outlier_fraction,
    haar_fourth_moments,
    spectrum_symmetry_error,
)
from src.modules.montecarlo_management.schema import SamplingMode
from src.modules.montecarlo_management.services import run_cell
from src.modules.validation_management.schema import CheckResult, CheckStatus, ValidationReport

KNOWN_FAULTS = ("haar_m_cross_sign",)

ROUTE_TOLERANCE = 1e-8
INTERPOLATION_TOLERANCE = 1e-6
PSEUDOINVERSE_SIGMA_HAT2 = 1e-12
PSEUDOINVERSE_TOLERANCE = 1e-4
BULK_EDGE_MARGIN = 0.15
IDENTITY_TOLERANCE = 1e-12


def _from_oracle(check: OracleCheck, group: str) -> CheckResult:
    statistic = check.z if check.z is not None else abs(check.estimate - check.expected)
    return CheckResult(
        name=check.name,
        group=group,
        statistic=statistic,
        tolerance=check.tolerance if check.z is not None else 1e-12 * max(1.0, abs(check.expected)),
        status=CheckStatus.PASSED if check.passed else CheckStatus.FAILED,
        details=f"estimate={check.estimate:.6g} expected={check.expected:.6g} draws={check.draws}",
    )


def _from_distribution(check: DistributionCheck, group: str) -> CheckResult:
    return CheckResult(
        name=check.name,
        group=group,
        statistic=check.p_value,
        tolerance=check.alpha,
        status=CheckStatus.PASSED if check.passed else CheckStatus.FAILED,
        details=f"chi2={check.statistic:.4g} draws={check.draws} (statistic is the p-value, must exceed alpha)",
    )


def _bounded(name: str, group: str, value: float, limit: float, details: str = "") -> CheckResult:
    return CheckResult(
        name=name,
        group=group,
        statistic=value,
        tolerance=limit,
        status=CheckStatus.PASSED if value < limit else CheckStatus.FAILED,
        details=details,
    )


class SelfValidationService:
    """
    Runs every validation suite with streams derived from one master seed.

    Suite k draws from StreamFactory(master_seed).child(ORACLE, k), so adding
    or skipping a suite never shifts the draws of another.
    """

    def __init__(self, quick: bool = False, master_seed: Optional[int] = None, faults: Optional[List[str]] = None):
        self.quick = quick
        self.draws = settings.validation_quick_draws if quick else settings.validation_draws
        self.sigmas = settings.validation_quick_sigmas if quick else settings.validation_sigmas
        self.streams = StreamFactory(settings.default_master_seed if master_seed is None else master_seed)
        self.faults = list(faults or [])
        unknown = [f for f in self.faults if f not in KNOWN_FAULTS]
        if unknown:
            raise InvalidInputError(f"unknown fault(s) {unknown}; known: {list(KNOWN_FAULTS)}")
        if self.faults:
            logger.warning(f"running validation with injected faults: {self.faults}")

    def _suite_streams(self, index: int) -> StreamFactory:
        return self.streams.child(StreamPurpose.ORACLE, index)

    def run(self) -> ValidationReport:
        """Run every suite and collect the report"""
        logger.info(f"self-validation started (quick={self.quick}, draws={self.draws}, band={self.sigmas} sigma)")
        suites: Dict[str, Callable[[StreamFactory], List[CheckResult]]] = {
            "haar": self.check_haar,
            "wishart": self.check_pinv_traces,
            "projector": self.check_projector_moments,
            "sandwich": self.check_gaussian_sandwich,
            "solve_routes": self.check_solve_routes,
            "interpolation": self.check_interpolation,
            "decomposition": self.check_decomposition_identity,
            "spectrum": self.check_spectrum,
            "smoke": self.check_smoke_cells,
        }
        checks: List[CheckResult] = []
        timings: Dict[str, float] = {}
        for index, (group, suite) in enumerate(suites.items()):
            start = time.perf_counter()
            try:
                results = suite(self._suite_streams(index))
            except Exception as e:
                logger.error(f"validation suite {group} raised: {e}")
                results = [CheckResult(name=group, group=group, status=CheckStatus.ERROR, details=str(e))]
            timings[group] = round(time.perf_counter() - start, 3)
            checks.extend(results)

        status = self._calculate_overall_status(checks)
        logger.info(f"self-validation finished: {status.value} ({sum(c.passed for c in checks)}/{len(checks)} passed)")
        return ValidationReport(
            status=status,
            quick=self.quick,
            draws=self.draws,
            sigmas=self.sigmas,
            checks=checks,
            faults=self.faults,
            timings=timings,
        )

    def _calculate_overall_status(self, checks: List[CheckResult]) -> CheckStatus:
        if any(check.status == CheckStatus.ERROR for check in checks):
            return CheckStatus.ERROR
        if all(check.passed for check in checks):
            return CheckStatus.PASSED
        return CheckStatus.FAILED

    # =========================================================================
    # Random-matrix identities
    # =========================================================================

    def check_haar(self, streams: StreamFactory) -> List[CheckResult]:
        """Fourth moments at p = 8, orthogonality and first-column law at p = 4."""
        expected = haar_fourth_moments(8)
        if "haar_m_cross_sign" in self.faults:
            expected = expected.model_copy(update={"m_cross": -expected.m_cross})
        results = [
            _from_oracle(check, "haar")
            for check in oracle_haar_fourth_moments(8, self.draws, streams.child(0), self.sigmas, expected)
        ]
        samples = sample_haar_batch(1000, 4, streams.generator(1))
        results.append(_bounded("haar_orthogonality(p=4)", "haar", haar_orthogonality_error(samples), 1e-12,
                                "max |Q^T Q - I| over 1000 samples"))
        results.append(_from_distribution(haar_first_column_chi2(4, self.draws, streams.child(2)), "haar"))
        return results

    def check_pinv_traces(self, streams: StreamFactory) -> List[CheckResult]:
        return [
            _from_oracle(oracle_pinv_gram_trace(n, p_bar, self.draws, streams.child(k), self.sigmas), "wishart")
            for k, (n, p_bar) in enumerate([(10, 4), (4, 10)])
        ]

    def check_projector_moments(self, streams: StreamFactory) -> List[CheckResult]:
        return [
            _from_oracle(check, "projector")
            for check in oracle_q_expectation(5, 12, 4, self.draws, streams, self.sigmas)
        ]

    def check_gaussian_sandwich(self, streams: StreamFactory) -> List[CheckResult]:
        return [
            _from_oracle(check, "sandwich")
            for check in oracle_gaussian_sandwich(np.diag([1.0, 2.0, 3.0]), 4, self.draws, streams, self.sigmas)
        ]

    # =========================================================================
    # Estimator identities
    # =========================================================================

    def check_solve_routes(self, streams: StreamFactory) -> List[CheckResult]:
        """SVD construction against both linear-solve routes over random shapes."""
        shape_rng = streams.generator(0)
        worst = 0.0
        for k in range(20):
            n = int(shape_rng.integers(2, 40))
            p_S = int(shape_rng.integers(1, 30))
            p_F = int(shape_rng.integers(0, 30))
            features = sample_features(ProblemConfig(p_S=p_S, p_F=p_F, n=n), streams.generator(1, k))
            for sigma_hat2 in (0.1, 1.0, 10.0):
                reference = build_misspecified(features, sigma_hat2).W_bar
                scale = max(np.max(np.abs(reference)), 1e-300)
                for route in SolveRoute:
                    other = build_misspecified_direct(features, sigma_hat2, route).W_bar
                    worst = max(worst, float(np.max(np.abs(other - reference)) / scale))
        return [_bounded("solve_route_agreement", "solve_routes", worst, ROUTE_TOLERANCE,
                         "max relative entry difference over 20 shapes x 3 sigma_hat2")]

    def check_interpolation(self, streams: StreamFactory) -> List[CheckResult]:
        """Minimum-norm estimator at p_bar = n reproduces y; small sigma_hat2 approaches the pseudoinverse."""
        rng = streams.generator(0)
        features = sample_features(ProblemConfig(p_S=20, p_F=10, n=30), rng)
        y = rng.standard_normal(30)
        W = build_misspecified(features, 0.0).W_bar
        residual = float(np.linalg.norm(y - features.A_bar @ (W @ y)) / np.linalg.norm(y))

        under = sample_features(ProblemConfig(p_S=10, p_F=5, n=40), streams.generator(1))
        limit = build_misspecified(under, 0.0).W_bar
        near_zero = build_misspecified(under, PSEUDOINVERSE_SIGMA_HAT2).W_bar
        gap = float(np.linalg.norm(near_zero - limit) / np.linalg.norm(limit))
        return [
            _bounded("interpolation_residual(p_bar=n=30)", "interpolation", residual, INTERPOLATION_TOLERANCE),
            _bounded(f"pseudoinverse_limit(sigma_hat2={PSEUDOINVERSE_SIGMA_HAT2:g})", "interpolation",
                     gap, PSEUDOINVERSE_TOLERANCE),
        ]

    def check_decomposition_identity(self, streams: StreamFactory) -> List[CheckResult]:
        """eps + eps_F + sigma_v2 equals the output error over random cells."""
        rng = streams.generator(0)
        cells = 100 if self.quick else 1000
        worst = 0.0
        checked = 0
        while checked < cells:
            p_S = int(rng.integers(1, 200))
            p_F = int(rng.integers(0, 400))
            n = int(rng.integers(2, 300))
            if classify_regime(n, p_S + p_F) == Regime.NEAR_THRESHOLD:
                continue
            trace_x_S, trace_x_C, sigma_v2 = rng.uniform(0.0, 100.0, size=3)
            eps = mse_min_norm(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2).eps
            eps_F = mse_fake(p_S, p_F, n, trace_x_S, trace_x_C, sigma_v2)
            eps_y = mse_output(p_S + p_F, n, trace_x_S, trace_x_C, sigma_v2)
            worst = max(worst, abs(eps + eps_F + sigma_v2 - eps_y) / abs(eps_y))
            checked += 1
        return [_bounded("output_error_decomposition", "decomposition", worst, IDENTITY_TOLERANCE,
                         f"max relative gap over {cells} cells")]

    def check_spectrum(self, streams: StreamFactory) -> List[CheckResult]:
        n, p_bar = (200, 50) if self.quick else (2000, 500)
        return [
            _bounded("spectrum_symmetry(n=30,p_bar=50)", "spectrum",
                     spectrum_symmetry_error(30, 50, streams.generator(0)), 1e-10),
            _bounded(f"bulk_edge_outliers(n={n},p_bar={p_bar})", "spectrum",
                     bulk_edge_outlier_fraction(n, p_bar, BULK_EDGE_MARGIN, streams.generator(1)), 0.01,
                     "fraction of eigenvalues outside the widened support"),
        ]

    # =========================================================================
    # Monte Carlo smoke cells
    # =========================================================================

    def check_smoke_cells(self, streams: StreamFactory) -> List[CheckResult]:
        """Minimum-norm closed form against conditional-trace Monte Carlo, one cell per regime."""
        M_r = 50 if self.quick else 200
        results = []
        for k, p_F in enumerate((0, 60)):
            config = ProblemConfig(p_S=20, p_F=p_F, n=40, sigma_v2=1.0)
            expected = mse_min_norm(20, p_F, 40, config.trace_x_S, config.trace_x_C, config.sigma_v2).eps
            cell = run_cell(config, M_r, 1, SamplingMode.CONDITIONAL_TRACE, streams.child(k))
            check = OracleCheck.compare(
                f"min_norm_vs_monte_carlo(p_S=20,p_F={p_F},n=40)",
                cell.eps_hat, float(expected), float(cell.eps_stderr or 0.0), self.sigmas, M_r,
            )
            results.append(_from_oracle(check, "smoke"))
        return results
