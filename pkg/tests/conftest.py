import warnings

import numpy as np
import pytest

from ou_diffuse.schedule import ScheduleWarning, build_schedule


def pytest_addoption(parser):
    parser.addoption("--skip-slow", action="store_true", help="skip long Monte-Carlo/training tests")


def pytest_collection_modifyitems(config, items):
    if not config.getoption("--skip-slow"):
        return
    skip = pytest.mark.skip(reason="--skip-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(scope="session")
def small_schedule():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ScheduleWarning)
        return build_schedule(3, 0.1, 0.3)


@pytest.fixture(scope="session")
def default_schedule():
    return build_schedule()


@pytest.fixture(scope="session")
def mid_schedule():
    return build_schedule(50, 1e-3, 0.3)


def two_mode_mixture(m, seed, centers=((-2.0, 0.0), (2.0, 1.0)), scale=0.5):
    """Equal-weight Gaussian mixture in 2-d; returns (points, mode index)."""
    rng = np.random.default_rng(seed)
    lab = rng.integers(0, 2, m)
    c = np.asarray(centers)
    return c[lab] + scale * rng.standard_normal((m, 2)), lab
