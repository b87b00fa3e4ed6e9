import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "qms",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("qms")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rand_matrix(rng, n, m=None):
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def rand_herm(rng, n):
    A = rand_matrix(rng, n)
    return (A + A.conj().T) / 2
