import numpy as np
import pytest

from cfpilot.dcp import DiversityMatrix


def rand_dm(K, rng, dim=2):
    x = rng.uniform(size=(K, dim))
    d = np.sqrt(((x[:, None] - x[None]) ** 2).sum(-1))
    np.fill_diagonal(d, 0.0)
    return DiversityMatrix(0.5 * (d + d.T))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
