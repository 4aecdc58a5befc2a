import numpy as np
import pytest

from doim_otfs.constellation import Constellation


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qpsk():
    return Constellation.gray(4)
