"""
Run observability for experiment commands.
Records per-operation wall time and call counts so a command can publish them
in its run manifest without letting timing leak into result files.
"""

import time
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, Iterator

from src.core.settings.logging import logger


class RunRecorder:
    """Timing recorder for one CLI command"""

    def __init__(self, command: str):
        self.command = command
        self.started_at = datetime.now(timezone.utc).isoformat()
        self._seconds: Dict[str, float] = {}
        self._calls: Dict[str, int] = {}
        self._failures: Dict[str, int] = {}

    @contextmanager
    def track(self, operation: str) -> Iterator[None]:
        """Time the enclosed block under `operation`."""
        start = time.perf_counter()
        success = False
        try:
            yield
            success = True
        finally:
            self.log_operation(operation, time.perf_counter() - start, success)

    def log_operation(self, operation: str, execution_time: float, success: bool) -> None:
        """Accumulate one completed operation"""
        self._seconds[operation] = self._seconds.get(operation, 0.0) + execution_time
        self._calls[operation] = self._calls.get(operation, 0) + 1
        if not success:
            self._failures[operation] = self._failures.get(operation, 0) + 1
            logger.warning(f"{self.command}: {operation} failed after {execution_time:.3f}s")
        else:
            logger.debug(f"{self.command}: {operation} took {execution_time:.3f}s")

    def timings(self) -> Dict[str, Any]:
        """Snapshot of all recorded operations, keyed by operation name"""
        return {
            name: {
                "seconds": round(self._seconds[name], 6),
                "calls": self._calls[name],
                "failures": self._failures.get(name, 0),
            }
            for name in sorted(self._seconds)
        }
