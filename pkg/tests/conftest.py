import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ou_inverse import GridSpec, OUModel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hurwitz(rng, dim=2, scale=3.0):
    """Random drift with every eigenvalue in the open left half plane."""
    while True:
        B = rng.uniform(-scale, scale, (dim, dim))
        if np.linalg.eigvals(B).real.max() < -0.05:
            return B


def random_spd(rng, dim=2):
    A = rng.uniform(-1, 1, (dim, dim))
    return A @ A.T + 0.2 * np.eye(dim)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_model():
    return OUModel(1.0, -1.0, 1.0)


@pytest.fixture
def grid1():
    return GridSpec(1, 16.0, 256)
