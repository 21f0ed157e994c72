import numpy as np
import pytest

from worldgauge.worlds import gen_grid_city, nav_world


@pytest.fixture(scope="session")
def small_grid():
    return gen_grid_city(6, 6, one_way_fraction=0.25, diagonal_fraction=0.1, seed=42)


@pytest.fixture(scope="session")
def small_nav(small_grid):
    return nav_world(small_grid)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
