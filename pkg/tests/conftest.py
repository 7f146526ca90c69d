import json
import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FROZEN_PATH = os.path.join(os.path.dirname(__file__), "data", "frozen.json")


@pytest.fixture(scope="session")
def frozen():
    with open(FROZEN_PATH) as fh:
        return json.load(fh)
