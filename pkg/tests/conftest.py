"""Shared fixtures and the acceptance-criteria summary hook.

Tests marked ``@pytest.mark.criterion(number, name, limit_seconds)`` are
grouped per criterion; the terminal summary prints one PASS/FAIL line per
criterion, failing it when any of its tests fail or the summed runtime
exceeds the limit.
"""

import numpy as np
import pytest

_NODE_CRITERION = {}
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, name, limit): acceptance criterion with a runtime limit in s")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is None:
            continue
        number, name, limit = mark.args
        _NODE_CRITERION[item.nodeid] = number
        _CRITERIA.setdefault(number, {"name": name, "limit": limit, "outcomes": [], "duration": 0.0})


def pytest_runtest_logreport(report):
    number = _NODE_CRITERION.get(report.nodeid)
    if number is None:
        return
    entry = _CRITERIA[number]
    entry["duration"] += report.duration
    if report.when == "call" or report.outcome != "passed":
        entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        outcomes = entry["outcomes"]
        in_time = entry["duration"] < entry["limit"]
        if not outcomes:
            status = "NOT RUN"
        elif all(o == "passed" for o in outcomes) and in_time:
            status = "PASS"
        else:
            status = "FAIL"
        note = "" if in_time else " (over time limit)"
        terminalreporter.write_line(
            f"criterion {number:2d}: {status:7s} {entry['name']} "
            f"[{entry['duration']:.1f}s, limit {entry['limit']}s]{note}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
