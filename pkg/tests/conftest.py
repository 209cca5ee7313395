import numpy as np
import pytest

from contagion_hjb import TimeGrid, data_path, load_params, solve_all, validate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def table1():
    return validate(load_params(data_path("table1.cfg")))


@pytest.fixture(scope="session")
def table1_solution(table1):
    """Shared full solve of the benchmark model on the N=1000 grid."""
    grid = TimeGrid(T=table1.T, N=1000)
    surface, policy = solve_all(table1, grid)
    return grid, surface, policy


def assert_strictly_decreasing(values, label=""):
    arr = np.asarray(values, dtype=float)
    assert np.all(np.diff(arr) < 0), f"{label} not strictly decreasing: {arr}"


def record_criterion(tag: str, ok: bool, detail: str):
    """One pass/fail line per acceptance criterion, echoed and summarized."""
    line = f"{tag}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
