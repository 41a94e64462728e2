from pathlib import Path

import pytest

from hmtd.world import seed_data_dir
from support import FIXTURES


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def data_dir(tmp_path) -> Path:
    """A fresh data directory seeded with the fixture world."""
    target = tmp_path / "data"
    seed_data_dir(target, FIXTURES)
    return target
