"""Shared test helpers and the acceptance-criteria reporter.

Acceptance tests register one pass/fail line per criterion via
record_criterion; the lines are printed in a dedicated section of the
terminal summary so they survive output capturing.
"""

import numpy as np
import pytest

_CRITERIA = {}


def record_criterion(name: str, ok: bool, detail: str = "") -> None:
    _CRITERIA[name] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_CRITERIA, key=lambda s: (len(s), s)):
        ok, detail = _CRITERIA[name]
        line = f"{name} {'PASS' if ok else 'FAIL'}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
