import re

import pytest

_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, text = marker.args
        _criteria.append((number, text, report.outcome, report.duration))


def _order(label):
    m = re.fullmatch(r"(\d+)(.*)", str(label))
    return (int(m.group(1)), m.group(2)) if m else (10**9, str(label))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, outcome, duration in sorted(_criteria, key=lambda c: _order(c[0])):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {number}: {text} ({duration:.1f}s)")
