import numpy as np
import pytest

from extremal import PathGrid, PowerLaw

# filled by test_acceptance.report(); printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture(scope="session")
def sqrt_drift():
    return PowerLaw(0.5)


@pytest.fixture(scope="session")
def grid14():
    return PathGrid.uniform(2**14)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
