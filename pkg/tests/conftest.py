import numpy as np
import pytest

from helpers import basic_camera


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def camera():
    return basic_camera()
