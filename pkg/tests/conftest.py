import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("tzlab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("tzlab")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_matrix(rng, n=3):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].lstrip("#"))):
            terminalreporter.write_line(line)
