from __future__ import annotations

import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion_report():
    """Record one summary line per acceptance criterion."""

    def record(k: int, passed: bool, detail: str) -> bool:
        line = f"criterion {k}: {'PASS' if passed else 'FAIL'} {detail}"
        CRITERIA[k] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
