"""
Counter-based random streams.

Every random draw in the lab comes from a generator addressed by a key path
(master seed, then counters such as cell index, realization index, purpose).
The generator for a given path is the same no matter which thread asks for it
or in which order, which is what makes results independent of the worker count.
"""

from enum import IntEnum
from typing import Tuple

import numpy as np


class StreamPurpose(IntEnum):
    """Last key of a stream path; keeps independent draws of one unit apart"""

    FEATURES = 0
    UNKNOWNS = 1
    HELD_OUT = 2
    COVARIANCE = 3
    SPECTRA = 4
    SPLITS = 5
    ORACLE = 6
    COLUMNS = 7


class StreamFactory:
    """Hands out Philox generators keyed by (master_seed, *path)."""

    def __init__(self, master_seed: int, path: Tuple[int, ...] = ()):
        if master_seed < 0:
            raise ValueError(f"master_seed must be non-negative, got {master_seed}")
        self.master_seed = int(master_seed)
        self.path = tuple(int(k) for k in path)

    def child(self, *keys: int) -> "StreamFactory":
        """Sub-factory whose streams live under path + keys"""
        return StreamFactory(self.master_seed, self.path + tuple(int(k) for k in keys))

    def seed_sequence(self, *keys: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=self.master_seed, spawn_key=self.path + tuple(int(k) for k in keys)
        )

    def generator(self, *keys: int) -> np.random.Generator:
        """Generator for path + keys; identical on every call with the same keys"""
        return np.random.Generator(np.random.Philox(self.seed_sequence(*keys)))

    def label(self, *keys: int) -> str:
        return "/".join(str(k) for k in (self.master_seed,) + self.path + tuple(keys))

    def __repr__(self) -> str:
        return f"StreamFactory({self.label()})"
