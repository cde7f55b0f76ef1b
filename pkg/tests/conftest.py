import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from honest_otr.data import Dataset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running Monte Carlo checks")


def index_data(n, p, rng, link=np.tanh, noise=0.3):
    """Small single-index sample with a randomized treatment."""
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:3] = [1.0, -0.8, 0.5]
    a = rng.integers(0, 2, n).astype(float)
    y = 0.3 * x[:, -1] + (a - 0.5) * 4.0 * link(x @ beta) + noise * rng.standard_normal(n)
    return Dataset(x, a, y), beta


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_data(rng):
    return index_data(120, 6, rng)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
