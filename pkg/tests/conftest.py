import math

import numpy as np
import pytest
from hypothesis import settings

from equipart.fields import Grid

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

SQRT2 = math.sqrt(2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def square():
    return Grid.cube(2, -1.0, 1.0, 21)
