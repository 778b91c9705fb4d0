import numpy as np
import pytest
from hypothesis import settings

from lastpassage.analytic_core import ModelParams
from lastpassage.kernels import canonical_test_function

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def unit():
    """lam = z = 1, the reference parameters of most checks."""
    return ModelParams(1.0, 1.0)


@pytest.fixture
def centred():
    """lam = 1 with the level at the origin (kernel and PDE work only)."""
    return ModelParams.for_kernels(1.0, 0.0)


@pytest.fixture
def canonical(centred):
    return canonical_test_function(centred)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
