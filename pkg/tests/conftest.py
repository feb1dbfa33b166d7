import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_acceptance = {}


def pytest_runtest_logreport(report):
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        info = dict(report.user_properties).get("acceptance")
        if info is not None:
            _acceptance[info] = report.outcome


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_setup(item):
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.user_properties.append(("acceptance", tuple(marker.args)))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for (number, desc), outcome in sorted(_acceptance.items()):
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status} criterion {number}: {desc}")
