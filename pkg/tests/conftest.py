import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def unit_rows(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def random_hermitian(rng, n):
    a = crandn(rng, n, n)
    return a + a.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
