"""Collects one PASS/FAIL line per acceptance criterion and prints them after the run."""

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """``report(label, ok, detail)`` records and prints one acceptance line."""

    def _report(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
