import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

import pytest

GOLDEN_DIR = pathlib.Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir() -> pathlib.Path:
    return GOLDEN_DIR
