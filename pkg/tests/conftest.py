import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from labcoupling import scenarios  # noqa: E402


@functools.lru_cache(maxsize=None)
def _scenario(name):
    return scenarios.builtin_scenario(name)


@pytest.fixture
def scenario():
    """Builtin scenarios, shared across the session (they are immutable)."""
    return _scenario


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
