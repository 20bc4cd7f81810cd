"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

from collections import defaultdict

import pytest

_OUTCOMES: dict[int, dict] = defaultdict(lambda: {"title": "", "passed": 0, "failed": 0, "xfailed": 0, "skipped": 0})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry = _OUTCOMES[marker.args[0]]
        entry["title"] = marker.args[1]
        if hasattr(report, "wasxfail"):
            entry["xfailed" if report.skipped else "failed"] += 1
        elif report.outcome in ("passed", "failed", "skipped"):
            entry[report.outcome] += 1


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        e = _OUTCOMES[number]
        if e["failed"]:
            status = "FAIL"
        elif e["xfailed"]:
            status = "PARTIAL"
        elif e["skipped"] or not e["passed"]:
            status = "NOT RUN"
        else:
            status = "PASS"
        detail = f"{e['passed']} passed, {e['failed']} failed, {e['xfailed']} known failures (strict xfail)"
        terminalreporter.write_line(f"{status} criterion {number} ({e['title']}): {detail}")
