import os
import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SUITE_LIMIT_S = 15 * 60
_LINES = pytest.StashKey[dict]()
_START = pytest.StashKey[float]()


def pytest_configure(config):
    config.stash[_LINES] = {}
    config.stash[_START] = time.perf_counter()


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion and print it."""
    lines = request.config.stash[_LINES]

    def add(number: int, ok: bool, detail: str):
        lines[number] = (ok, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return add


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, {})
    elapsed = time.perf_counter() - config.stash[_START]
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        ok, detail = lines[number]
        if number == 8:
            # the full-suite time limit belongs to this criterion
            ok = ok and elapsed < SUITE_LIMIT_S
            detail += f"; suite wall time {elapsed:.0f}s (limit {SUITE_LIMIT_S}s)"
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
