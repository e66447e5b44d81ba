import numpy as np
import pytest

from gridfdi import bundled_case, load_case
from gridfdi.powerflow import compute_ptdf


@pytest.fixture(scope="session")
def case3_path():
    return bundled_case("case3.m")


@pytest.fixture(scope="session")
def case118_path():
    return bundled_case("case118.m")


@pytest.fixture(scope="session")
def net3(case3_path):
    return load_case(case3_path)


@pytest.fixture(scope="session")
def net118(case118_path):
    return load_case(case118_path)


@pytest.fixture(scope="session")
def ptdf3(net3):
    return compute_ptdf(net3)


@pytest.fixture(scope="session")
def ptdf118(net118):
    return compute_ptdf(net118)


@pytest.fixture
def rng():
    return np.random.default_rng(20180713)
