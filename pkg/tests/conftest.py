import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", max_examples=30, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")

FAITHFUL = os.path.join(os.path.dirname(__file__), "..",
                        "src", "mixorder", "data", "faithful.csv")


@pytest.fixture(scope="session")
def faithful_path():
    return os.path.abspath(FAITHFUL)


def make_univariate(means, variances, weights):
    """Small helper: build MixtureParams for d=1 tests."""
    from mixorder import GaussianComponent, MixtureParams

    comps = tuple(
        GaussianComponent(np.array([m]), np.array([[v]]))
        for m, v in zip(means, variances))
    return MixtureParams(weights=np.asarray(weights, dtype=float), components=comps)
