import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dhtexp.bsds import bsds_matrix  # noqa: E402
from dhtexp.prob import HypothesisPair  # noqa: E402
from dhtexp.reproduce import counterexample_pair  # noqa: E402


def bsds_pair(p, q):
    return HypothesisPair.from_arrays(bsds_matrix(p), bsds_matrix(q))


def random_pair(rng, nx, ny, alpha=1.0):
    p = rng.dirichlet(np.full(nx * ny, alpha)).reshape(nx, ny)
    q = rng.dirichlet(np.full(nx * ny, alpha)).reshape(nx, ny)
    return HypothesisPair.from_arrays(p, q)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def counterexample():
    return counterexample_pair()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
