"""
Experiment plumbing: config loading, long-format frames, CSV and manifest output.
"""

import hashlib
import json
import re

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.core.errors import ConfigError, InvalidInputError, LabError, UnsupportedError
from src.core.services.random import StreamFactory
from src.core.settings.config import settings
from src.core.settings.logging import logger
from src.modules.analytic_management.schema import MomentMethod, MseBreakdown, Regime
from src.modules.analytic_management.services import analytic_breakdown, classify_regime, mse_large_n, mse_ridge
from src.modules.dataset_management.schema import RealDataSweepResult
from src.modules.experiments_management.schema import (
    SECTION_MODELS,
    AnalyticConfig,
    OutputRecord,
    RunManifest,
)
from src.modules.moments_management.services import estimate_moments_grid
from src.modules.montecarlo_management.schema import CellResult, SweepResult

ConfigModel = TypeVar("ConfigModel", bound=BaseModel)

ANALYTIC_COLUMNS = [
    "p_S", "p_C", "p_F", "n", "sigma_v2", "sigma_hat2",
    "eps", "eps_stderr", "eps_F", "eps_y", "eps_normalized", "regime", "formula_id",
]

MONTECARLO_COLUMNS = [
    "label", "axis", "axis_value", "p_S", "p_C", "p_F", "n", "sigma_v2", "sigma_hat2",
    "eps_hat", "stderr", "eps_S_hat", "eps_S_stderr", "eps_C_hat", "eps_C_stderr", "eps_F_hat", "eps_F_stderr",
    "eps_y_hat", "eps_y_stderr", "eps_y_decomposed", "eps_y_decomposed_stderr",
    "eps_analytic", "eps_analytic_stderr", "eps_F_analytic", "eps_y_analytic",
    "eps_normalized", "eps_analytic_normalized", "regime", "formula_id", "M_r", "M_u", "mode",
]

REALDATA_COLUMNS = ["width", "sigma_hat2", "mean_error", "stderr", "mean_train_residual", "regime"]

SUMMARY_COLUMNS = [
    "sigma_hat2", "train_count", "peak_width", "global_min_width", "min_error",
    "underparam_min_error", "overparam_global_min",
]

_TOML_LINE = re.compile(r"line (\d+)")


# =============================================================================
# Config loading
# =============================================================================

def _locate_key(text: str, section: str, key: str) -> Optional[int]:
    """1-based line of `key = ...` inside [section], or of the section header."""
    current = None
    header_line = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("["):
            current = stripped.strip("[]").strip()
            if current == section:
                header_line = number
            continue
        if current == section and re.match(rf"{re.escape(key)}\s*=", stripped):
            return number
    return header_line


def _validation_error(e: ValidationError, text: str, section: str, source: str) -> ConfigError:
    first = e.errors()[0]
    loc = [str(part) for part in first.get("loc", ())]
    key = loc[0] if loc else section
    line = _locate_key(text, section, key) if text else None
    return ConfigError(f"[{section}] {'.'.join(loc) or section}: {first.get('msg')}", line=line, source=source)


def load_section(
    path: Path, command: str, overrides: Optional[Dict[str, Any]] = None
) -> Tuple[BaseModel, Dict[str, Any]]:
    """
    Read the [command] section of a TOML config, or the resolved config of a manifest.

    Args:
        path: TOML config or a run manifest JSON
        command: Subcommand whose section is wanted
        overrides: Command-line values replacing file values (None entries ignored)

    Returns:
        The validated section model and its fully resolved dict
    """
    model_cls: Type[BaseModel] = SECTION_MODELS[command]
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}", source=source) from e

    if path.suffix == ".json":
        try:
            manifest = RunManifest.model_validate_json(text)
        except ValidationError as e:
            raise ConfigError(f"not a run manifest: {e.errors()[0].get('msg')}", source=source) from e
        if manifest.command != command:
            raise ConfigError(f"manifest was written by '{manifest.command}', not '{command}'", source=source)
        raw = dict(manifest.resolved_config)
        text = ""
    else:
        try:
            document = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = _TOML_LINE.search(str(e))
            raise ConfigError(f"malformed TOML: {e}", line=int(match.group(1)) if match else None, source=source) from e
        if command not in document:
            raise ConfigError(f"missing [{command}] section", source=source)
        raw = dict(document[command])

    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        model = model_cls.model_validate(raw)
    except ValidationError as e:
        raise _validation_error(e, text, command, source) from e
    return model, model.model_dump(mode="json")


# =============================================================================
# Output
# =============================================================================

def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_csv(frame: pd.DataFrame, path: Path) -> OutputRecord:
    """Write a frame with 17 significant digits; NaN and infinities become empty cells."""
    path.parent.mkdir(parents=True, exist_ok=True)
    clean = frame.replace([np.inf, -np.inf], np.nan)
    clean.to_csv(path, index=False, float_format=settings.csv_float_format, na_rep="", lineterminator="\n")
    logger.info(f"wrote {len(clean)} rows to {path}")
    return OutputRecord(name=path.name, sha256=sha256_file(path), rows=len(clean))


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".manifest.json")


def companion_path(csv_path: Path, tag: str) -> Path:
    """Sibling file such as results/sweep.summary.csv"""
    return csv_path.with_name(f"{csv_path.stem}.{tag}{csv_path.suffix or '.csv'}")


def write_manifest(
    csv_path: Path,
    command: str,
    resolved_config: Dict[str, Any],
    outputs: List[OutputRecord],
    timings: Dict[str, Any],
    summary: Optional[Dict[str, Any]] = None,
) -> Path:
    manifest = RunManifest(
        command=command,
        master_seed=int(resolved_config.get("master_seed", settings.default_master_seed)),
        resolved_config=resolved_config,
        timings=timings,
        outputs=outputs,
        summary=summary or {},
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    path = manifest_path(csv_path)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"wrote manifest {path}")
    return path


def verify_manifest(path: Path) -> Dict[str, bool]:
    """Recompute the hash of every output listed in a manifest; True where it still matches."""
    try:
        manifest = RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InvalidInputError(f"{path} is not a run manifest") from e
    results = {}
    for output in manifest.outputs:
        target = Path(path).parent / output.name
        results[output.name] = target.exists() and sha256_file(target) == output.sha256
        if not results[output.name]:
            logger.warning(f"manifest mismatch for {target}")
    return results


# =============================================================================
# Frames
# =============================================================================

def _undefined_breakdown(n: int, p_bar: int, formula_id: str) -> MseBreakdown:
    return MseBreakdown(regime=classify_regime(n, p_bar), formula_id=formula_id)


def analytic_frame(config: AnalyticConfig) -> pd.DataFrame:
    """One row per (sigma_v2, sigma_hat2, p_F) cell of the closed-form grid."""
    positive = [s for s in config.sigma_hat2 if s > 0]
    sampled: Dict[int, Dict[float, Any]] = {}
    if positive and config.moment_method == MomentMethod.SAMPLED:
        root = StreamFactory(config.master_seed)
        for index, p_F in enumerate(config.p_F):
            p_bar = config.p_S + p_F
            if p_bar <= 1:
                continue
            moments = estimate_moments_grid(
                config.n, p_bar, positive, config.p_S, config.num_spectra, root.child(0, index), config.threads
            )
            sampled[p_F] = {m.sigma_hat2: m for m in moments}

    rows = []
    total = config.trace_x_S + config.trace_x_C
    for sigma_v2 in config.sigma_v2:
        for sigma_hat2 in config.sigma_hat2:
            for p_F in config.p_F:
                p_bar = config.p_S + p_F
                args = (config.p_S, p_F, config.n, config.trace_x_S, config.trace_x_C, sigma_v2)
                try:
                    if sigma_hat2 == 0:
                        breakdown = analytic_breakdown(*args)
                    elif config.moment_method == MomentMethod.LARGE_N:
                        breakdown = mse_large_n(*args, sigma_hat2)
                    elif p_bar <= 1:
                        breakdown = _undefined_breakdown(config.n, p_bar, "unsupported")
                    else:
                        breakdown = mse_ridge(*args, sampled[p_F][float(sigma_hat2)])
                except UnsupportedError as e:
                    logger.warning(f"no closed form at p_F={p_F}, sigma_hat2={sigma_hat2:g}: {e}")
                    breakdown = _undefined_breakdown(config.n, p_bar, "unsupported")
                rows.append(
                    {
                        "p_S": config.p_S,
                        "p_C": config.p_C,
                        "p_F": p_F,
                        "n": config.n,
                        "sigma_v2": sigma_v2,
                        "sigma_hat2": sigma_hat2,
                        "eps": breakdown.eps,
                        "eps_stderr": breakdown.eps_stderr,
                        "eps_F": breakdown.eps_F,
                        "eps_y": breakdown.eps_y,
                        "eps_normalized": breakdown.eps / total if breakdown.eps is not None and total > 0 else None,
                        "regime": breakdown.regime.value,
                        "formula_id": breakdown.formula_id,
                    }
                )
    near = sum(1 for row in rows if row["regime"] == Regime.NEAR_THRESHOLD.value)
    if near:
        logger.warning(f"{near} analytic cells are near the interpolation threshold and left empty")
    return pd.DataFrame(rows, columns=ANALYTIC_COLUMNS)


def _cell_row(cell: CellResult, axis: str, label: Optional[str]) -> Dict[str, Any]:
    est, analytic, config = cell.estimate, cell.analytic, cell.config
    return {
        "label": label,
        "axis": axis,
        "axis_value": cell.axis_value,
        "p_S": config.p_S,
        "p_C": config.p_C,
        "p_F": config.p_F,
        "n": config.n,
        "sigma_v2": config.sigma_v2,
        "sigma_hat2": config.sigma_hat2,
        "eps_hat": est.eps_hat,
        "stderr": est.eps_stderr,
        "eps_S_hat": est.eps_S_hat,
        "eps_S_stderr": est.eps_S_stderr,
        "eps_C_hat": est.eps_C_hat,
        "eps_C_stderr": est.eps_C_stderr,
        "eps_F_hat": est.eps_F_hat,
        "eps_F_stderr": est.eps_F_stderr,
        "eps_y_hat": est.eps_y_hat,
        "eps_y_stderr": est.eps_y_stderr,
        "eps_y_decomposed": est.eps_y_decomposed,
        "eps_y_decomposed_stderr": est.eps_y_decomposed_stderr,
        "eps_analytic": analytic.eps if analytic else None,
        "eps_analytic_stderr": analytic.eps_stderr if analytic else None,
        "eps_F_analytic": analytic.eps_F if analytic else None,
        "eps_y_analytic": analytic.eps_y if analytic else None,
        "eps_normalized": cell.eps_normalized,
        "eps_analytic_normalized": cell.analytic_normalized,
        "regime": cell.regime.value,
        "formula_id": analytic.formula_id if analytic else None,
        "M_r": est.M_r,
        "M_u": est.M_u,
        "mode": est.mode.value,
    }


def sweep_frame(sweeps: List[SweepResult]) -> pd.DataFrame:
    """Long-format rows of one or more sweeps, tagged by each plan's label."""
    rows = [
        _cell_row(cell, sweep.plan.axis.kind.value, sweep.plan.label)
        for sweep in sweeps
        for cell in sweep.cells
    ]
    return pd.DataFrame(rows, columns=MONTECARLO_COLUMNS)


def realdata_frames(result: RealDataSweepResult) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """Width curve rows and the double-descent summary block."""
    curve = pd.DataFrame(
        [{**point.model_dump(), "regime": point.regime.value} for point in result.points], columns=REALDATA_COLUMNS
    )
    summary = pd.DataFrame([s.model_dump() for s in result.summaries], columns=SUMMARY_COLUMNS)
    return curve, summary


def failure_exit_code(error: BaseException) -> int:
    """Process exit code for an error escaping a command."""
    if isinstance(error, LabError):
        return error.exit_code
    if isinstance(error, OSError):
        return 3
    return 1
