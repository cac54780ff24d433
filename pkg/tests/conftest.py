import numpy as np
import pytest

from quadrix import LevelFamily, QuadraticForm


@pytest.fixture
def hyperbola1():
    """z^2 = x^2 + k, n = 1."""
    return LevelFamily(QuadraticForm((1.0,)), alpha=2.0, sign="minus")


@pytest.fixture
def unit_sphere2():
    """z^2 + x1^2 + x2^2 = k, n = 2."""
    return LevelFamily(QuadraticForm((1.0, 1.0)), alpha=2.0, sign="plus")


@pytest.fixture
def paraboloid2():
    """z = x1^2 + x2^2 + k, n = 2."""
    return LevelFamily(QuadraticForm((1.0, 1.0)), alpha=1.0, sign="minus")


def trio(a=(1.0, 2.0)):
    """The three canonical families with shared coefficients."""
    return {
        "elliptic_hyperboloid": LevelFamily(QuadraticForm(a), 2.0, "minus"),
        "ellipsoid": LevelFamily(QuadraticForm(a), 2.0, "plus"),
        "elliptic_paraboloid": LevelFamily(QuadraticForm(a), 1.0, "minus"),
    }


def seeded_xs(n, count, seed, half_width):
    rng = np.random.default_rng(seed)
    return rng.uniform(-half_width, half_width, size=(count, n))
