import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mfglab import ModelParams, TimeGrid

Q_TEST_GRID = [-1.0, -0.5, 0.0, 0.25, 0.5, 0.75]


def make_scenario(q: float, T: float = 1.0, x0: float = 1.0, sigma: float = 1.0,
                  n_steps: int = 2000):
    params = ModelParams(q=q, T=T, x0=x0, sigma=sigma)
    return params, TimeGrid(n_steps=n_steps, T=T)


@pytest.fixture
def scenario():
    """Default fixture scenario: q = 0.5, T = 1, x0 = 1, sigma = 1."""
    return make_scenario(0.5)
