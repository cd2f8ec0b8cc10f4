import numpy as np
import pytest

from epochfpa.distributions import FiniteSupport, Uniform


@pytest.fixture
def uniform01():
    return Uniform(0.0, 1.0)


@pytest.fixture
def two_point():
    return FiniteSupport(((1.0, 0.5), (2.0, 0.5)))


@pytest.fixture
def point_mass():
    return FiniteSupport(((3.0, 1.0),))


def random_finite(rng: np.random.Generator, size: int) -> FiniteSupport:
    """Random strictly increasing support with Dirichlet weights."""
    values = np.cumsum(rng.uniform(0.2, 1.5, size))
    probs = rng.dirichlet(np.ones(size))
    return FiniteSupport(tuple(zip(values.tolist(), probs.tolist())))
