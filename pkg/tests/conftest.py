"""Shared fixtures and the acceptance summary hook."""

import numpy as np
import pytest

import burgers_fbsde as bf

_ACCEPTANCE = {}


@pytest.fixture
def record_acceptance():
    """Collector for the acceptance gate; one line per criterion at exit."""

    def _record(number: int, label: str, passed: bool, detail: str = ""):
        _ACCEPTANCE[number] = (label, passed, detail)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        label, passed, detail = _ACCEPTANCE[number]
        verdict = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        terminalreporter.write_line(
            f"ACCEPTANCE {number} {label}: {verdict}{suffix}"
        )


@pytest.fixture(scope="session")
def grid32():
    return bf.GridSpec(1, 32)


@pytest.fixture(scope="session")
def sine_terminal32(grid32):
    nodes = grid32.axis_coordinates()
    return bf.PeriodicField(grid32, (0.5 * np.sin(nodes))[:, None])
