import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))  # url_cases / goldens / helpers imports

FIXTURES = TESTS_DIR / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def pages_dir() -> Path:
    return FIXTURES / "pages"


@pytest.fixture(scope="session")
def cdx_dir() -> Path:
    return FIXTURES / "cdx"
