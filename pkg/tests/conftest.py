import os
from pathlib import Path

import pytest

# Persistent repo-local cache so the expensive real-mode tables build
# once and every later run (and the acceptance suite) reuses them.
REPO_ROOT = Path(__file__).resolve().parent.parent
os.environ.setdefault("MISCOST_CACHE_DIR", str(REPO_ROOT / ".miscost-cache"))

from miscost.numerics import ModelParams, NumericContext  # noqa: E402


@pytest.fixture(scope="session")
def p_half():
    return ModelParams.from_string("1/2")


@pytest.fixture(scope="session")
def p_third():
    return ModelParams.from_string("1/3")


@pytest.fixture(scope="session")
def ctx256():
    return NumericContext(precision_bits=256)


@pytest.fixture(scope="session")
def ctx128():
    return NumericContext(precision_bits=128)
