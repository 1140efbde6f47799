import os

import pytest

CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: hours-long run; enable with --runslow or NFLSIM_RUNSLOW=1")
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("NFLSIM_RUNSLOW") == "1":
        return
    skip = pytest.mark.skip(reason="slow; enable with --runslow or NFLSIM_RUNSLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if call.when == "setup" and call.excinfo is not None and call.excinfo.errisinstance(pytest.skip.Exception):
        CRITERIA[n] = ("SKIP", item.name)
    elif call.when == "call":
        CRITERIA[n] = ("FAIL" if call.excinfo is not None else "PASS", item.name)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, name = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {status}  ({name})")
