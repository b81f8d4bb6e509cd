import pytest

from singular_system.grid import RadialGrid
from singular_system.params import derive_params


@pytest.fixture(scope="session")
def prm():
    return derive_params(3, 1.6)


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def coarse():
    return RadialGrid(1e-6, 512)
