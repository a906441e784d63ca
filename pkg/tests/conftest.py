import numpy as np
import pytest

from casimirgas import BornInfeld, Chaplygin, Grid


@pytest.fixture
def grid64():
    return Grid(64)


@pytest.fixture
def grid128():
    return Grid(128)


@pytest.fixture
def grid256():
    return Grid(256)


@pytest.fixture
def chap():
    return Chaplygin(0.5)


@pytest.fixture
def bi():
    return BornInfeld(1.0, 1.0)


def random_trig_values(grid, seed, n_modes=5, amplitude=1.0, offset=0.0):
    """Smooth random field: trigonometric polynomial plus a constant."""
    rng = np.random.default_rng(seed)
    out = np.full(grid.n, offset)
    for k in range(1, n_modes + 1):
        a, b = rng.standard_normal(2)
        out += amplitude * (a * np.cos(k * grid.x) + b * np.sin(k * grid.x)) / k
    return out
