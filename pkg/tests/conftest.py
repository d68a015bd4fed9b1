import numpy as np
import pytest
from hypothesis import settings

from maxmin_auctions.measure import UNIFORM, PowerMarginal, build_band_reference, build_iid_reference

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def uniform400():
    return build_iid_reference(UNIFORM, 400)


@pytest.fixture(scope="session")
def uniform200():
    return build_iid_reference(UNIFORM, 200)


@pytest.fixture(scope="session")
def square200():
    return build_iid_reference(PowerMarginal(2.0), 200)


@pytest.fixture(scope="session")
def band_half():
    return build_band_reference(0.5, 200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
