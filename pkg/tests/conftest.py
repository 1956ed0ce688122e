import numpy as np
import pytest

from arfimabayes.model import ArfimaParams, simulate_arfima


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def series_0d1():
    """n=400 ARFIMA(0,d,1) path with d=0.2, theta=0.2."""
    return simulate_arfima(ArfimaParams(d=0.2, theta=0.2), 400, seed=11)


@pytest.fixture(scope="session")
def series_1d1():
    return simulate_arfima(ArfimaParams(d=0.2, phi=0.5, theta=0.5), 300, seed=12)
