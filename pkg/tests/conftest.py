import os

import numpy as np
import pytest

_CRITERIA = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        ok = report.outcome == "passed"
        _CRITERIA[crit] = _CRITERIA.get(crit, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA):
        status = "PASS" if _CRITERIA[crit] else "FAIL"
        terminalreporter.write_line(f"criterion {crit:2d}: {status}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("PERMDECOMP_") and key != "PERMDECOMP_PURE_PYTHON":
            monkeypatch.delenv(key)
    return monkeypatch
