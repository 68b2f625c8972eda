import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("stochhom", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("stochhom")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
