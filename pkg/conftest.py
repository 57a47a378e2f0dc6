import numpy as np
import pytest

from maps import AffineContractionMap, ShiftedCatMap, SolenoidMap


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run the acceptance-scale studies (minutes)")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def solenoid():
    return SolenoidMap()


@pytest.fixture
def affine():
    return AffineContractionMap(a=0.5)


@pytest.fixture
def cat():
    return ShiftedCatMap()


@pytest.fixture
def rng():
    return np.random.default_rng(20140101)


def cylindrical_point(r, theta, z):
    return np.array([r * np.cos(theta), r * np.sin(theta), z])


def solenoid_attractor_points(count, s=1.0, seed=0):
    """Points on the solenoid attractor after a short spin-up from random starts."""
    sys = SolenoidMap()
    rng = np.random.default_rng(seed)
    u = np.stack([sys.sample_initial_state(rng, s) for _ in range(count)])
    for _ in range(200):
        u = sys.step(u, s)
    return u
