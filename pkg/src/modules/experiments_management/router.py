"""
Command-line router: subcommands analytic, montecarlo, realdata, validate.
"""

import argparse
from typing import Callable, Dict

from src.core.settings.config import settings
from .handlers import ExperimentHandler


def _add_common(parser: argparse.ArgumentParser, with_config: bool = True) -> None:
    if with_config:
        parser.add_argument("--config", metavar="PATH", help="TOML experiment config, or a run manifest JSON to replay")
        parser.add_argument("--out", metavar="PATH", help=f"Output CSV (default under {settings.output_dir}/)")
    parser.add_argument("--seed", type=int, metavar="U64", help="Master seed, overrides the config")
    parser.add_argument("--threads", type=int, metavar="N", help="Worker thread cap, overrides the config")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")


def build_parser() -> argparse.ArgumentParser:
    """Parser for the lmmse-lab command line"""
    parser = argparse.ArgumentParser(
        prog="lmmse-lab",
        description="Misspecified LMMSE estimation: closed forms, Monte Carlo sweeps and real-data double descent.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    commands = parser.add_subparsers(dest="command", required=True)

    _add_common(commands.add_parser("analytic", help="Closed-form error grid"))
    _add_common(commands.add_parser("montecarlo", help="Monte Carlo sweep with analytic companions"))

    realdata = commands.add_parser("realdata", help="Width sweep over a tabular dataset")
    _add_common(realdata)
    realdata.add_argument("--data", metavar="PATH", help="Dataset CSV, overrides the config")
    realdata.add_argument("--planted", action="store_true", help="Write a planted synthetic dataset to --data first")

    validate = commands.add_parser("validate", help="Run the self-validation suite")
    _add_common(validate, with_config=False)
    validate.add_argument("--quick", action="store_true", help="Reduced draws and looser tolerances")
    validate.add_argument("--inject-fault", metavar="NAME", help=argparse.SUPPRESS)
    return parser


def dispatch(args: argparse.Namespace) -> int:
    """Run the handler for args.command and return its exit code"""
    handler = ExperimentHandler(args)
    routes: Dict[str, Callable[[], int]] = {
        "analytic": handler.handle_analytic,
        "montecarlo": handler.handle_montecarlo,
        "realdata": handler.handle_realdata,
        "validate": handler.handle_validate,
    }
    return routes[args.command]()
