import numpy as np
import pytest

from app.cache import stencil_cache
from app.grid import Box, TLevels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def box1d():
    return Box(dim=1, half_width=4.0, cells_per_axis=32)


@pytest.fixture
def box2d():
    return Box(dim=2, half_width=2.0, cells_per_axis=12)


@pytest.fixture
def tlevels():
    return TLevels(t_min=0.25, t_max=2.0, count=4)


@pytest.fixture(autouse=True)
def fresh_cache():
    stencil_cache.clear()
    yield
    stencil_cache.clear()
