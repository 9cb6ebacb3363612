"""Shared fixtures and the acceptance summary.

Acceptance tests are named ``test_c<NN>_...``; after the run a one-line
PASS/FAIL verdict per criterion is printed so the gate can be read at a
glance.
"""
import re

import pytest

_CRITERION = re.compile(r"test_c(\d+)[a-z]?_(\w+)")
_results: dict[str, tuple[int, str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    num, name = int(m.group(1)), m.group(2)
    outcome = report.outcome.upper()
    prev = _results.get(report.nodeid)
    if prev is None or outcome == "FAILED":
        _results[report.nodeid] = (num, name, outcome)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for num, name, outcome in sorted(_results.values()):
        word = "PASS" if outcome == "PASSED" else ("SKIP" if outcome == "SKIPPED" else "FAIL")
        tr.write_line(f"criterion {num:2d} [{name}]: {word}")


@pytest.fixture(scope="session")
def rng_factory():
    import numpy as np

    def make(seed=0):
        return np.random.default_rng(seed)

    return make
