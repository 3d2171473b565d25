import numpy as np
import pytest

from transbem.assembly import Assembler, P1Space
from transbem.mesh import make_icosphere


@pytest.fixture(scope="session")
def sphere1():
    return make_icosphere(1.0, 1)


@pytest.fixture(scope="session")
def sphere2():
    return make_icosphere(1.0, 2)


@pytest.fixture(scope="session")
def sphere3():
    return make_icosphere(1.0, 3)


@pytest.fixture(scope="session")
def assembler():
    """Shared operator cache; tests must not mutate assembled entries."""
    return Assembler()


@pytest.fixture(scope="session")
def space2(sphere2):
    return P1Space(sphere2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
