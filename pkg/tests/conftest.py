"""Prints one PASS/FAIL line per acceptance criterion at the end of the run."""

from __future__ import annotations

import pytest

_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    report = outcome.get_result()
    number, title = marker.args
    if report.when == "call" or report.failed:
        previous = _RESULTS.get(number, ("PASS", title))[0]
        status = "FAIL" if report.failed or previous == "FAIL" else ("SKIP" if report.skipped else "PASS")
        _RESULTS[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title = _RESULTS[number]
        terminalreporter.write_line(f"AC{number:<2} {status}  {title}")
