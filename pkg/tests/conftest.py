# conftest.py
import pathlib
import sys

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "scripts"))

from run_config import load_config  # noqa: E402
from thinset import enumerate_set  # noqa: E402

CONFIGS = ROOT / "configs"


def pytest_addoption(parser):
    parser.addoption(
        "--full-scale",
        action="store_true",
        default=False,
        help="Run desk-scale tests (10^6 horizons) marked slow.",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full-scale"):
        return
    skip = pytest.mark.skip(reason="desk-scale test; pass --full-scale to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def full_scale(request):
    return request.config.getoption("--full-scale")


def spec_of(name):
    return load_config(str(CONFIGS / f"{name}.yaml")).spec


@pytest.fixture(scope="session")
def nh_set():
    """B_- for h = x^1.5 with difference psi, on [1, 20000]."""
    return enumerate_set(spec_of("nh15"), 20000)


@pytest.fixture(scope="session")
def pow105_set():
    return enumerate_set(spec_of("pow105"), 1 << 16)


@pytest.fixture(scope="session")
def pow125_set():
    return enumerate_set(spec_of("pow125"), 1 << 14)


@pytest.fixture(scope="session")
def pow102_set():
    return enumerate_set(spec_of("pow102"), 1 << 14)


@pytest.fixture(scope="session")
def powlog105_set():
    """x^1.05 log x: 1 is not in B (elements start 2, 4, 6, 9, 12)."""
    return enumerate_set(spec_of("powlog105"), 1 << 12)
