"""Run independent instances concurrently.

Each instance is handed to a worker thread; results come back in input
order, failures as the raised exception.
"""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Callable, Sequence
from typing import TypeVar, Union

from .config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def gather_instances(
    func: Callable[[T], R],
    instances: Sequence[T],
    max_concurrency: int | None = None,
) -> list[Union[R, BaseException]]:
    """Apply ``func`` to every instance, at most ``max_concurrency`` at a time."""
    limit = max_concurrency or get_settings().max_concurrency
    semaphore = asyncio.Semaphore(max(1, limit))

    async def run(index: int, instance: T) -> R:
        async with semaphore:
            logger.debug(f"instance {index} started")
            return await asyncio.to_thread(func, instance)

    tasks = [run(index, instance) for index, instance in enumerate(instances)]
    results = await asyncio.gather(*tasks, return_exceptions=True)

    failures = sum(isinstance(result, BaseException) for result in results)
    if failures:
        logger.warning(f"{failures} of {len(results)} instances failed")
    return results


def map_instances(
    func: Callable[[T], R],
    instances: Sequence[T],
    max_concurrency: int | None = None,
) -> list[R]:
    """Synchronous :func:`gather_instances` that re-raises the first failure."""
    results = asyncio.run(gather_instances(func, instances, max_concurrency))
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return results
