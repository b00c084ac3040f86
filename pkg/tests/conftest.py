import math

import pytest

from flexmech import prototype_default_config

DEG16 = math.radians(16.0)


@pytest.fixture(scope="session")
def default_config():
    return prototype_default_config()


@pytest.fixture(scope="session")
def default_ei(default_config):
    return default_config.rigidity
