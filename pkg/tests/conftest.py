import math

import numpy as np
import pytest

from domsplit.cocycle import CocycleSpec
from domsplit.sft import SftSystem

P0 = np.array([[1.0, 0.5], [0.2, 1.0]])
P1 = np.array([[1.0, -0.3], [0.4, 1.0]])
Q0 = np.array([[1.0, 0.3, 0.0], [0.1, 1.0, 0.2], [0.0, 0.2, 1.0]])
Q1 = np.array([[1.0, 0.0, 0.3], [0.2, 1.0, 0.0], [0.0, -0.1, 1.0]])
SWAP = np.array([[0.0, 2.0], [0.5, 0.0]])
HALF = np.diag([2.0, 0.5])


@pytest.fixture(scope="session")
def full2():
    return SftSystem.full_shift(2)


@pytest.fixture(scope="session")
def golden():
    return SftSystem.golden_mean()


@pytest.fixture(scope="session")
def hyp2(full2):
    """A(x) = P(sx) diag(e, 1/e) P(x)^-1 with P depending on x_0."""
    return CocycleSpec.conjugated_diagonal(full2, [1.0, -1.0], {0: P0, 1: P1})


@pytest.fixture(scope="session")
def hyp3(full2):
    return CocycleSpec.conjugated_diagonal(full2, [1.0, 0.0, -1.0], {0: Q0, 1: Q1})


@pytest.fixture(scope="session")
def narrow2(full2):
    d = 0.01
    return CocycleSpec.conjugated_diagonal(full2, {0: [1 + d, -1 - d], 1: [1 - d, -1 + d]}, {0: P0, 1: P1})


@pytest.fixture(scope="session")
def swap(full2):
    return CocycleSpec.one_step(full2, {0: HALF, 1: SWAP})


@pytest.fixture(scope="session")
def half(full2):
    return CocycleSpec.constant(full2, HALF)


@pytest.fixture(scope="session")
def diag21(full2):
    return CocycleSpec.constant(full2, np.diag([2.0, 1.0]))


@pytest.fixture(scope="session")
def galerkin(full2):
    return CocycleSpec.weighted_shift(full2, 16, {0: 1.0, 1: 2.0}, decay=0.9)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


LOG2 = math.log(2.0)

_lines = []


def record(line):
    _lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
