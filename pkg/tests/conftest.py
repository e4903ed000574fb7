"""Shared fixtures for the lab test suite."""

from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
import pytest

from src.core.services.random import StreamFactory
from src.modules.model_management import ProblemConfig


@pytest.fixture
def streams() -> StreamFactory:
    return StreamFactory(12345)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


@pytest.fixture
def small_config() -> ProblemConfig:
    """Underparameterized design small enough for exact enumeration in tests"""
    return ProblemConfig.build(p_S=6, p_C=2, p_F=3, n=20, sigma_v2=0.5)


@pytest.fixture
def write_table(tmp_path: Path) -> Callable[..., Path]:
    """Write a DataFrame (or raw text) to a CSV under tmp_path and return the path."""

    def _write(content, name: str = "table.csv") -> Path:
        path = tmp_path / name
        if isinstance(content, pd.DataFrame):
            content.to_csv(path, index=False, float_format="%.17g")
        else:
            path.write_text(content, encoding="utf-8")
        return path

    return _write


@pytest.fixture
def write_config(tmp_path: Path) -> Callable[[str, str], Path]:
    """Write TOML text to tmp_path/name."""

    def _write(text: str, name: str = "experiment.toml") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
