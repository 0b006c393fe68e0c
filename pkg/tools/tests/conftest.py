"""Shared fixtures for the smoothed dynamic programming tests."""

import numpy as np
import pytest

from tools.smoothed_dp.dag import Dag
from tools.smoothed_dp.models import Regularizer


SIGMA = np.exp(2.0) / (np.exp(2.0) + 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def diamond():
    """1→2→4 scored 1 + 1, 1→3→4 scored 0 + 0 (0-based nodes)."""
    return Dag.from_edges(4, [(1, 0, 1.0), (3, 1, 1.0), (2, 0, 0.0), (3, 2, 0.0)])


@pytest.fixture
def chain():
    return Dag.from_edges(3, [(1, 0, 0.5), (2, 1, -1.25)])


@pytest.fixture(params=["entropy", "l2"])
def reg(request):
    return Regularizer(kind=request.param, gamma=1.0)


@pytest.fixture
def entropy():
    return Regularizer.entropy(1.0)
