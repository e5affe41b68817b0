import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_coord_instance(rng, n=None, with_signal=True):
    """Random inputs for a single-coordinate solve: (x, yr, w_plus, p)."""
    if n is None:
        n = int(rng.integers(5, 31))
    x = rng.standard_normal(n)
    while float(x @ x) < 1e-6:
        x = rng.standard_normal(n)
    yr = rng.standard_normal(n) * rng.uniform(0.5, 2.0)
    if with_signal:
        w_plus = rng.standard_normal(n) * rng.uniform(0.2, 1.5)
    else:
        w_plus = np.zeros(n)
    p = float(rng.uniform(0.05, 1.0))
    return x, yr, w_plus, p
