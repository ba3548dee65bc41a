"""Pytest configuration and fixtures for sg-waves tests."""

import os
import shutil
import tempfile
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).parent.parent


@pytest.fixture
def temp_dir():
    """Provide a temporary directory for tests."""
    temp = tempfile.mkdtemp(prefix="sgwaves_test_")
    yield Path(temp)
    shutil.rmtree(temp, ignore_errors=True)


@pytest.fixture
def cli_env(temp_dir):
    """Environment for running the CLI in a subprocess against this checkout."""
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join(p for p in (str(REPO_ROOT), env.get("PYTHONPATH")) if p)
    env["HOME"] = str(temp_dir)
    env.pop("SGWAVES_OUTPUT_DIR", None)
    return env
