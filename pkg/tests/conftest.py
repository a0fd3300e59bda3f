import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dtwsketch.metric import FiniteMatrix

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_metric(k: int, rng: np.random.Generator, high: int = 20) -> FiniteMatrix:
    """Shortest-path closure of random integer weights: always a metric."""
    P = rng.integers(1, high, (k, k))
    M = np.minimum(P, P.T)
    np.fill_diagonal(M, 0)
    for j in range(k):
        M = np.minimum(M, M[:, j:j + 1] + M[j:j + 1, :])
    return FiniteMatrix(M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
