import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# the ODE of the grid experiment; a damped cubic oscillator with a
# Gaussian bump centred at (1, 1)
BUMP_ODE = "diff(u,x,2) + 0.708203932*u*diff(u,x) + 5*u^3 + exp(-10*((x-1)^2+(u-1)^2))"

_CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = {}


@pytest.fixture
def record_criterion(request):
    """Store one acceptance line: ``record_criterion(n, passed, detail)``."""
    store = request.config.stash[_CRITERIA_KEY]

    def record(n: int, passed: bool, detail: str):
        store[n] = (passed, detail)
        print(f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_CRITERIA_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(store):
        passed, detail = store[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
