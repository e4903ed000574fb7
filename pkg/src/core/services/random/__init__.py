"""
Deterministic random streams.
"""

from .streams import StreamFactory, StreamPurpose

__all__ = ["StreamFactory", "StreamPurpose"]
