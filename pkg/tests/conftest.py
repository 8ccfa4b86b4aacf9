import numpy as np
import pytest

from riesz_mgrit.mesh import SpatialGrid, uniform_temporal
from riesz_mgrit.verify import make_problem, manufactured_case


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def small_case():
    return manufactured_case(0.8, 0.7, 2.0, 0.5)


@pytest.fixture
def small_problem(small_case):
    """Tiny problem (M=4, N=8) suitable for dense oracles."""
    return make_problem(small_case, SpatialGrid(4, 4), uniform_temporal(1.0, 8))
