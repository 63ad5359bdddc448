import logging

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_solver_warnings(caplog):
    caplog.set_level(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_measure(rng, n, d, scale=1.0):
    from semot import EmpiricalDistribution

    return EmpiricalDistribution(scale * rng.standard_normal((n, d)), rng.dirichlet(np.ones(n)))
