import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from nctrunc.models import (  # noqa: E402
    SpherePolynomial,
    almost_commutative_model,
    circle_model,
    nc_torus_model,
    toeplitz_model,
)

D_F = np.array([[0.0, 1.0], [1.0, 0.5]])
THETA = np.array([[0.0, 0.37], [-0.37, 0.0]])


@pytest.fixture(scope="session")
def circle():
    return circle_model()


@pytest.fixture(scope="session")
def toeplitz():
    return toeplitz_model()


@pytest.fixture(scope="session")
def torus():
    return nc_torus_model(2)


@pytest.fixture(scope="session")
def nctorus():
    return nc_torus_model(2, THETA)


@pytest.fixture(scope="session")
def ac():
    return almost_commutative_model(D_F)


@pytest.fixture(scope="session")
def x1():
    return SpherePolynomial.coordinate(2, 0)


@pytest.fixture(scope="session")
def x2():
    return SpherePolynomial.coordinate(2, 1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
