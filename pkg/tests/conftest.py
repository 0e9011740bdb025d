"""Test plumbing: prints one PASS/FAIL line per acceptance criterion at the
end of the session so the gate can be read at a glance."""

from __future__ import annotations

import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    criterion = marker.kwargs.get("criterion")
    if criterion is None:
        return
    criterion = int(criterion)
    current = _ACCEPTANCE.get(criterion)
    if report.failed:
        _ACCEPTANCE[criterion] = "FAIL"
    elif report.skipped and current is None:
        _ACCEPTANCE[criterion] = "SKIP"
    elif report.when == "call" and report.passed and current != "FAIL":
        _ACCEPTANCE[criterion] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"ACCEPTANCE criterion {criterion:2d}: {_ACCEPTANCE[criterion]}")
