import numpy as np
import pytest

from subnyq import CompoundChannel


def random_channel(gen: np.random.Generator, flat: bool = False) -> CompoundChannel:
    """A small random channel; gains in [0.5, 2.0], q in 1..3."""
    n = int(gen.integers(4, 9))
    k = int(gen.integers(1, n // 2 + 1))
    q = int(gen.integers(1, 4))
    bandwidth = float(gen.uniform(1.0, 8.0))
    power = float(gen.uniform(0.5, 20.0))
    if flat:
        gains = np.full((n, q), float(gen.uniform(0.5, 2.0)))
    else:
        gains = gen.uniform(0.5, 2.0, size=(n, q))
    return CompoundChannel(
        bandwidth=bandwidth, n_subbands=n, k_active=k, power=power, gain_grid=gains
    )


@pytest.fixture
def gen():
    return np.random.default_rng(20230517)
