"""
Misspecified LMMSE lab - command-line entry point.
"""

import sys
from typing import List, Optional

from src.core.settings.config import settings
from src.core.settings.logging import logger, set_log_level
from src.modules.experiments_management.router import build_parser, dispatch
from src.modules.experiments_management.services import failure_exit_code


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand and map failures to exit codes"""
    args = build_parser().parse_args(argv)
    if args.verbose:
        set_log_level("DEBUG")
    if args.threads is not None and args.threads < 1:
        logger.error("--threads must be at least 1")
        return 2

    logger.info(f"{settings.app_name} {settings.app_version}: {args.command}")
    try:
        return dispatch(args)
    except Exception as e:
        code = failure_exit_code(e)
        logger.error(f"{args.command} failed: {e}")
        if settings.debug:
            logger.exception("traceback")
        return code


if __name__ == "__main__":
    sys.exit(main())
