"""
Experiment command handlers.
Each handler resolves its config, runs one protocol, writes CSV output plus
the paired manifest, and returns the process exit code.
"""

from argparse import Namespace
from pathlib import Path
from typing import Any, Dict, List, Optional, cast

from src.core.errors import ConfigError
from src.core.services.random import StreamFactory, StreamPurpose
from src.core.settings.config import settings
from src.core.settings.logging import logger
from src.core.settings.observability import RunRecorder
from src.modules.dataset_management.services import ingest_csv, run_realdata_sweep, write_planted_csv
from src.modules.experiments_management.schema import (
    AnalyticConfig,
    MonteCarloConfig,
    MonteCarloProtocol,
    OutputRecord,
    RealDataConfig,
)
from src.modules.experiments_management.services import (
    analytic_frame,
    companion_path,
    load_section,
    realdata_frames,
    sweep_frame,
    write_csv,
    write_manifest,
)
from src.modules.montecarlo_management.schema import SweepAxis, SweepPlan, SweepResult
from src.modules.montecarlo_management.services import (
    run_covariance_experiment,
    run_decomposition_sweep,
    run_sigma_sweep,
    run_sweep,
)
from src.modules.validation_management.schema import CheckStatus
from src.modules.validation_management.services import SelfValidationService

# planted tables are drawn from their own stream so they never overlap sweep draws
_PLANTED_STREAM = 9


class ExperimentHandler:
    """Dispatch target of every subcommand"""

    def __init__(self, args: Namespace):
        self.args = args
        self.recorder = RunRecorder(args.command)

    def _overrides(self) -> Dict[str, Any]:
        return {"master_seed": self.args.seed, "threads": self.args.threads}

    def _output(self, default_name: str) -> Path:
        if self.args.out:
            return Path(self.args.out)
        return settings.output_dir / default_name

    def _require_config(self) -> Path:
        if not self.args.config:
            raise ConfigError(f"{self.args.command} needs --config PATH")
        return Path(self.args.config)

    def handle_analytic(self) -> int:
        section, resolved = load_section(self._require_config(), "analytic", self._overrides())
        config = cast(AnalyticConfig, section)
        out = self._output("analytic.csv")
        with self.recorder.track("analytic_grid"):
            frame = analytic_frame(config)
        record = write_csv(frame, out)
        write_manifest(out, "analytic", resolved, [record], self.recorder.timings())
        return 0

    def handle_montecarlo(self) -> int:
        section, resolved = load_section(self._require_config(), "montecarlo", self._overrides())
        config = cast(MonteCarloConfig, section)
        out = self._output(f"montecarlo_{config.protocol.value}.csv")
        summary: Dict[str, Any] = {}
        base = config.to_problem()
        logger.info(f"montecarlo protocol {config.protocol.value} with {len(config.values)} axis values")

        with self.recorder.track(f"montecarlo_{config.protocol.value}"):
            sweeps: List[SweepResult]
            if config.protocol == MonteCarloProtocol.SIGMA:
                result = run_sigma_sweep(
                    base, config.values, config.M_r, config.M_u, config.mode,
                    config.master_seed, config.threads, config.num_spectra,
                )
                sweeps = [result]
                summary = {
                    "argmin_sigma_hat2": result.argmin_sigma_hat2,
                    "argmin_eps": result.argmin_eps,
                    "optimal_sigma_hat2": result.optimal_sigma_hat2,
                    "optimum_exact": result.optimum_exact,
                }
            elif config.protocol == MonteCarloProtocol.DECOMPOSITION:
                sweeps = [
                    run_decomposition_sweep(
                        base, config.int_values(), config.M_r, config.M_u,
                        config.resolved_test_points(), config.mode, config.master_seed, config.threads,
                    )
                ]
            elif config.protocol == MonteCarloProtocol.COVARIANCE:
                experiment = run_covariance_experiment(
                    config.pairs, base, config.int_values(), config.M_r, config.M_u,
                    config.rotation_policy, config.mode, config.master_seed, config.threads,
                )
                sweeps = [pair.sweep for pair in experiment.pairs]
                summary = {"rotation_policy": experiment.rotation_policy.value}
            else:
                plan = SweepPlan(
                    base=base,
                    axis=SweepAxis(kind=config.axis_kind, values=config.values),
                    M_r=config.M_r,
                    M_u=config.M_u,
                    mode=config.mode,
                    master_seed=config.master_seed,
                    threads=config.threads,
                    num_spectra=config.num_spectra,
                    test_points=config.resolved_test_points(),
                )
                sweeps = [run_sweep(plan)]

        record = write_csv(sweep_frame(sweeps), out)
        write_manifest(out, "montecarlo", resolved, [record], self.recorder.timings(), summary)
        return 0

    def handle_realdata(self) -> int:
        section, resolved = load_section(self._require_config(), "realdata", self._overrides())
        config = cast(RealDataConfig, section)
        data_path: Optional[str] = self.args.data or config.data
        if not data_path:
            raise ConfigError("realdata needs a dataset: pass --data PATH or set 'data' in [realdata]")
        path = Path(data_path)

        if self.args.planted:
            planted = config.planted
            signal = planted.P if planted.signal_features is None else planted.signal_features
            rng = StreamFactory(config.master_seed).generator(_PLANTED_STREAM, StreamPurpose.FEATURES)
            with self.recorder.track("write_planted"):
                write_planted_csv(path, planted.N, planted.P, signal, planted.sigma_v2, rng)

        with self.recorder.track("ingest"):
            data = ingest_csv(path, config.response_column)
        plan = config.to_plan()
        with self.recorder.track("width_sweep"):
            result = run_realdata_sweep(data, plan)

        out = self._output("realdata.csv")
        curve, summary = realdata_frames(result)
        records: List[OutputRecord] = [write_csv(curve, out), write_csv(summary, companion_path(out, "summary"))]
        resolved = {**resolved, "data": str(path)}
        write_manifest(
            out, "realdata", resolved, records, self.recorder.timings(),
            {"dataset": data.provenance.model_dump() if data.provenance else None, **result.metadata},
        )
        for block in result.summaries:
            logger.info(
                f"sigma_hat2={block.sigma_hat2:g}: peak at p_bar={block.peak_width}, "
                f"global min at p_bar={block.global_min_width} (overparameterized={block.overparam_global_min})"
            )
        return 0

    def handle_validate(self) -> int:
        faults = [self.args.inject_fault] if self.args.inject_fault else []
        service = SelfValidationService(quick=self.args.quick, master_seed=self.args.seed, faults=faults)
        with self.recorder.track("validate"):
            report = service.run()

        print(f"{'check':<48} {'statistic':>14} {'tolerance':>12}  verdict")
        for check in report.checks:
            statistic = "" if check.statistic is None else f"{check.statistic:.6g}"
            tolerance = "" if check.tolerance is None else f"{check.tolerance:.3g}"
            print(f"{check.name:<48} {statistic:>14} {tolerance:>12}  {check.status.value}")
        print(f"overall: {report.status.value} ({len(report.failed_checks)} failing)")
        return 0 if report.status == CheckStatus.PASSED else 1
