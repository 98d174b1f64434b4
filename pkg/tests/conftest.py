import numpy as np
import pytest

from rssphase.operators import operator_pair


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def dense_pair(kind, n, dim=1):
    A, B = operator_pair(kind, n, dim)
    return A, B, A.dense(), B.dense()


def grid_weights(B):
    """Trapezoidal weights on vertex grids, ones on cell grids."""
    w1 = np.ones(B.n)
    if B.centering == "vertex":
        w1[0] = w1[-1] = 0.5
    out = np.ones((B.n,) * B.dim)
    for axis in range(B.dim):
        shape = [1] * B.dim
        shape[axis] = B.n
        out = out * w1.reshape(shape)
    return out
