import numpy as np
import pytest

from sinkdiv import BoundingBox, DiscreteMeasure, uniform


@pytest.fixture
def unit_box():
    return BoundingBox(np.array([0.0]), np.array([1.0]))


@pytest.fixture
def unit_square():
    return BoundingBox(np.array([0.0, 0.0]), np.array([1.0, 1.0]))


@pytest.fixture
def example_pair():
    """Four-atom 1D toy: two atoms at 0 and 1 versus two at 0.1 and 0.9."""
    mu = DiscreteMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))
    nu = DiscreteMeasure(np.array([[0.1], [0.9]]), np.array([0.5, 0.5]))
    return mu, nu


def random_measure(rng, n, box, weights="random"):
    pts = box.lower + rng.random((n, box.dim)) * (box.upper - box.lower)
    if weights == "uniform":
        return uniform(pts)
    w = rng.random(n) + 1e-3
    return DiscreteMeasure.normalized(pts, w)


@pytest.fixture
def make_random_measure():
    return random_measure
