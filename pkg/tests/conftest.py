import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS_DIR))

NOOP_SERVER = TESTS_DIR / "noop_server.py"


def noop_endpoint(*extra_args: str) -> str:
    """exec: endpoint string launching the no-op protocol server."""
    parts = [sys.executable, str(NOOP_SERVER), *extra_args]
    return "exec:" + " ".join(parts)


@pytest.fixture
def noop_exec():
    return noop_endpoint


@pytest.fixture
def blob_dataset(tmp_path):
    """50 random rectangle/ellipse image/mask pairs."""
    from synthdata import write_blob_dataset

    return write_blob_dataset(tmp_path / "blobs", count=50, seed=0)


@pytest.fixture
def small_dataset(tmp_path):
    """A handful of pairs for fast pipeline tests."""
    from synthdata import write_blob_dataset

    return write_blob_dataset(tmp_path / "small", count=4, seed=3)
