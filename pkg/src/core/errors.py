"""Domain errors shared by every lab module.

Each error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class LabError(Exception):
    """Base class of all lab errors"""

    exit_code = 1


class InvalidSpecError(LabError, ValueError):
    """A covariance spec or problem configuration is malformed"""


class InvalidInputError(LabError, ValueError):
    """An operation received arguments outside its domain"""


class UnsupportedError(LabError, ValueError):
    """The hypotheses of a closed form are not met"""


class NearThresholdError(LabError):
    """A closed form is undefined because |n - p_bar| <= 1"""

    def __init__(self, n: int, p_bar: int, what: str = "closed form"):
        self.n = n
        self.p_bar = p_bar
        super().__init__(f"{what} undefined near the interpolation threshold (n={n}, p_bar={p_bar})")


class IngestionError(LabError):
    """A tabular dataset could not be ingested"""

    exit_code = 3

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ConfigError(LabError):
    """An experiment config file is malformed"""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        prefix = source or "config"
        if line is not None:
            prefix = f"{prefix}:{line}"
        super().__init__(f"{prefix}: {message}")
