import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from levysteinitz.series import builtin_family  # noqa: E402

TRIANGLE = [[1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]]


@pytest.fixture(scope="session")
def ahg():
    """((-1)^n / n, 2^-n): the planar example with a line of sums."""
    return builtin_family("alt_harmonic_geometric")


@pytest.fixture(scope="session")
def triangle():
    """Rows of an equilateral triangle scaled by 1/block: sums fill the plane."""
    return builtin_family("custom_table", {"rows": TRIANGLE})


_RESULTS = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _RESULTS[report.nodeid] = report.outcome
    elif "test_acceptance" in report.nodeid and report.failed:
        _RESULTS[report.nodeid] = "failed"


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_RESULTS.items()):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
