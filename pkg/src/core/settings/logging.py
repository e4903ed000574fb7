import logging
import os

import colorlog

from src.core.settings.config import settings

environment = os.getenv('PY_ENV', 'development')

LOGGER_NAME = 'misspec_lmmse_lab'
LOG_FORMAT = '%(asctime)s loglevel=%(levelname)-6s logger=%(name)s %(funcName)s() L%(lineno)-4d %(message)s'

logger = logging.getLogger(LOGGER_NAME)
logger.setLevel(settings.log_level)
logger.propagate = False

if not logger.handlers:
    handler = logging.StreamHandler()
    if environment == 'production':
        formatter: logging.Formatter = logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S')
    else:
        # Create a custom log level-to-color mapping
        log_colors = {
            'DEBUG': 'green',
            'INFO': 'blue',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'red,bg_white',
        }
        formatter = colorlog.ColoredFormatter(
            '%(log_color)s' + LOG_FORMAT,
            datefmt='%Y-%m-%d %H:%M:%S',
            log_colors=log_colors,
        )
    handler.setFormatter(formatter)
    logger.addHandler(handler)


def set_log_level(level: str) -> None:
    """Change the lab logger level at runtime (the CLI --verbose flag)."""
    logger.setLevel(level.upper())
