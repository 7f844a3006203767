import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


def random_problem(gen, n=60, s=3, noise=0.5):
    """A small well-conditioned regression problem for solver tests."""
    X = gen.standard_normal((n, s))
    beta = gen.uniform(-2.0, 2.0, size=s)
    y = X @ beta + noise * gen.standard_normal(n)
    return X, y, beta
