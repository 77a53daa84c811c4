import numpy as np
import pytest

from mra_sync import GridSpec, KernelSpec, build_row_covariance


@pytest.fixture(scope="session")
def default_grid():
    # the desk-scale experimental geometry: 6x6 blocks of 3x4 cells, d = 2
    return GridSpec(6, 6, 3, 4, 2)


@pytest.fixture(scope="session")
def default_cov(default_grid):
    return build_row_covariance(default_grid, KernelSpec(5.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
