"""Tests for concurrent instance evaluation."""

import numpy as np
import pytest

from tools.smoothed_dp.batch import gather_instances, map_instances
from tools.smoothed_dp.dtw import dtw_value
from tools.smoothed_dp.errors import DomainError
from tools.smoothed_dp.models import Regularizer


def _square(x: int) -> int:
    return x * x


def _fails_on_three(x: int) -> int:
    if x == 3:
        raise DomainError("three")
    return x


@pytest.mark.asyncio
async def test_results_keep_input_order():
    results = await gather_instances(_square, list(range(20)), max_concurrency=3)
    assert results == [x * x for x in range(20)]


@pytest.mark.asyncio
async def test_failures_are_returned_in_place():
    results = await gather_instances(_fails_on_three, [1, 2, 3, 4], max_concurrency=2)
    assert results[:2] == [1, 2]
    assert isinstance(results[2], DomainError)
    assert results[3] == 4


@pytest.mark.asyncio
async def test_empty_batch():
    assert await gather_instances(_square, []) == []


def test_map_instances_matches_a_loop(rng):
    reg = Regularizer.entropy()
    costs = [rng.normal(size=(3, 4)) for _ in range(6)]
    results = map_instances(lambda theta: dtw_value(theta, reg), costs, max_concurrency=2)
    np.testing.assert_allclose(results, [dtw_value(theta, reg) for theta in costs])


def test_map_instances_reraises():
    with pytest.raises(DomainError):
        map_instances(_fails_on_three, [1, 3, 5])
