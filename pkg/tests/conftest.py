import os

import numpy as np
import pytest

THREADS = min(8, os.cpu_count() or 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
