"""Shared fixtures and the acceptance-criteria report hook."""

from __future__ import annotations

import numpy as np
import pytest

# Populated by tests/test_acceptance.py: {criterion_number: (passed, detail)}.
CRITERION_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    CRITERION_RESULTS[number] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(CRITERION_RESULTS):
        passed, detail = CRITERION_RESULTS[number]
        verdict = "PASS" if passed else "FAIL"
        tr.write_line(f"CRITERION {number}: {verdict} - {detail}")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20260814))
