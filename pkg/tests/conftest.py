from __future__ import annotations

import pytest

_CRITERIA: list[str] = []


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records a PASS/FAIL line, then asserts ``ok``."""

    def check(number: int, ok: bool, detail: str):
        expected_fail = request.node.get_closest_marker("xfail") is not None
        status = "PASS" if ok else ("FAIL (known, xfail)" if expected_fail else "FAIL")
        line = f"criterion {number:>2}: {status} — {detail}"
        print(line)
        _CRITERIA.append(line)
        assert ok, detail

    return check


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
