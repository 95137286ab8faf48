import os
from fractions import Fraction

import pytest

from rxinfer import kernels
from rxinfer.cli import cache_name
from rxinfer.core import IID
from rxinfer.table import CacheError, CacheMismatch, build_lambda_table, load_table

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CACHE_DIR = os.environ.get("RXINFER_TEST_CACHE", os.path.join(ROOT, ".rxcache"))

_acceptance_lines: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table100():
    """Full s=100 coin-flip table, persisted between sessions (about a minute to build)."""
    spec = IID(Fraction(1, 2))
    os.makedirs(CACHE_DIR, exist_ok=True)
    path = os.path.join(CACHE_DIR, cache_name(100, spec))
    if os.path.exists(path):
        try:
            return load_table(path, 100, spec, "exact")
        except (CacheError, CacheMismatch):
            pass
    table = build_lambda_table(100, spec)
    table.save(path)
    return table


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    original = kernels.backend
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(original)
