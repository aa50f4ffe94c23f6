import numpy as np
import pytest
from hypothesis import settings

from _models import doubling, iid23

settings.register_profile("qthermo", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("qthermo")


@pytest.fixture
def dbl():
    return doubling()


@pytest.fixture
def mix23():
    return iid23()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
