from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def mini_dataset_dir() -> Path:
    return FIXTURES / "abtbuy_mini"
