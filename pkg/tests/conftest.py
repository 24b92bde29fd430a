from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
sys.path.insert(0, str(SRC))

from simcal.core import RandomStream  # noqa: E402


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: desk-scale acceptance run (set SIMCAL_RUN_SLOW=1)")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if os.environ.get("SIMCAL_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set SIMCAL_RUN_SLOW=1 to run acceptance tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def stream() -> RandomStream:
    return RandomStream(seed=1234, stream_id="tests")
