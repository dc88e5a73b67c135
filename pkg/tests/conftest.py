import numpy as np
import pytest
from hypothesis import strategies as st

from surfnet import NetworkDims, init_gaussian
from surfnet.rng import stream


def random_net(seed: int, k: int = 3, widths=(6, 9), n: int = 12):
    return init_gaussian(NetworkDims(k=k, widths=tuple(widths), n=n), seed)


def rng_for(seed: int, tag: str = "test") -> np.random.Generator:
    return stream(seed, 0, tag)


@st.composite
def small_dims(draw):
    k = draw(st.integers(1, 4))
    depth = draw(st.integers(1, 3))
    widths = tuple(draw(st.integers(1, 8)) for _ in range(depth))
    n = draw(st.integers(1, 8))
    return NetworkDims(k=k, widths=widths, n=n)


@pytest.fixture
def abs_net():
    from surfnet import zoo
    return zoo.abs_network()
