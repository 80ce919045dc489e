import numpy as np
import pytest

from demon_sim import FockDistribution


def gaussian_dist(mean: float, sigma: float, n_max: int) -> FockDistribution:
    """Discrete bell-shaped distribution used as a post-subtraction stand-in."""
    m = np.arange(n_max + 1)
    w = np.exp(-((m - mean) ** 2) / (2.0 * sigma**2))
    return FockDistribution(w / w.sum(), 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(988)
