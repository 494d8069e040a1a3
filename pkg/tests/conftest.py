import os
import sys

import numpy as np
import pytest

proj_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, proj_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
