import numpy as np
import pytest

from fairstream.store import TimeSeriesStore


@pytest.fixture
def store(tmp_path):
    s = TimeSeriesStore(tmp_path / "data")
    yield s
    s.close()


@pytest.fixture
def rng():
    return np.random.default_rng(0xFA15)


_ACCEPTANCE_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[name]
        mark = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"{mark:6s} {name}")
