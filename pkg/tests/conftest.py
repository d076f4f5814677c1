import numpy as np
import pytest

from buruli.grid import Grid, State


@pytest.fixture
def small_grid():
    return Grid(12, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_state(small_grid, rng):
    """Smooth-ish positive state with all four fields in [0, 0.5]."""
    g = small_grid
    shape = g.shape
    return State(
        g,
        u=0.5 * rng.random(shape),
        m=0.001 * rng.random(shape),
        v=0.5 * rng.random(shape),
        n=0.1 * rng.random(shape),
    )


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
