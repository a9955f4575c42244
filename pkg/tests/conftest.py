import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wecfarm.farm import FarmBounds
from wecfarm.hydro import HydroModel
from wecfarm.scenario import load_scenario, monochromatic

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return HydroModel()


@pytest.fixture(scope="session")
def perth():
    return load_scenario("perth_like.scn")


@pytest.fixture(scope="session")
def mono():
    return monochromatic()


@pytest.fixture
def bounds4():
    return FarmBounds(4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
