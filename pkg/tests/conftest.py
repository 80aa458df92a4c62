import numpy as np
import pytest

from balancedbound import quadrature as q


@pytest.fixture(scope="session")
def cp1_grid():
    return q.build_grid(q.MetricSpec.cp1_fs(), 32)


@pytest.fixture(scope="session")
def g24_small():
    """Invariant-measure grid on G(2,4) small enough for unit tests."""
    return q.build_grid(q.MetricSpec.grassmann_fs(2, 4), 4000, seed=17)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
