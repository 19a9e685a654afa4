# tests/conftest.py
import os
import tempfile

import numpy as np
import pytest

from src import config as app_config


@pytest.fixture
def temp_data_dir():
    """
    Creates a temporary directory for test input/output files.
    Yields the path to this directory.
    Cleans up the directory after the test.
    """
    with tempfile.TemporaryDirectory() as tmpdir:
        os.makedirs(os.path.join(tmpdir, "output"), exist_ok=True)
        yield tmpdir


@pytest.fixture
def rng():
    """Seeded generator so Monte Carlo assertions are reproducible."""
    return np.random.default_rng(app_config.DEFAULT_SEED)


@pytest.fixture(autouse=True)
def quiet_log_level(monkeypatch):
    """Keeps CLI tests from inheriting a verbose CHAINIMP_LOG from the developer's shell."""
    monkeypatch.setenv(app_config.LOG_ENV_VAR, "WARNING")
