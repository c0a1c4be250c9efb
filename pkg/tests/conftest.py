import numpy as np
import pytest

import aoc


@pytest.fixture(scope="session")
def so3_j123():
    return aoc.so3_model((1.0, 2.0, 3.0))


@pytest.fixture(scope="session")
def so3_j123_group(so3_j123):
    return aoc.so3_group(so3_j123)


@pytest.fixture(scope="session")
def so3_m2():
    return aoc.so3_model((1.0, 2.0, 3.0), m=2)


@pytest.fixture(scope="session")
def so3_m2_group(so3_m2):
    return aoc.so3_group(so3_m2)


@pytest.fixture(scope="session")
def so3_unit():
    return aoc.so3_model((1.0, 1.0, 1.0))


@pytest.fixture(scope="session")
def so3_unit_group(so3_unit):
    return aoc.so3_group(so3_unit)


@pytest.fixture(scope="session")
def abelian1():
    return aoc.abelian_model(1)


@pytest.fixture(scope="session")
def abelian1_group(abelian1):
    return aoc.abelian_group(abelian1)


@pytest.fixture(scope="session")
def abelian3():
    return aoc.abelian_model(3, m=2, inertia=np.diag([2.0, 3.0, 5.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
