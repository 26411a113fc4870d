"""Ordered worker pools."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")

logger = logging.getLogger(__name__)


def map_jobs(fn: Callable[[T], R], items: Iterable[T], jobs: int = 1) -> List[R]:
    """
    Apply ``fn`` to every item, preserving input order.

    With ``jobs <= 1`` everything runs in-process. Otherwise a process pool
    with at most ``jobs`` workers is used; ``fn`` and the items must then be
    picklable (module-level functions, plain data).

    Args:
        fn: Function to apply
        items: Inputs
        jobs: Maximum worker count

    Returns:
        List of results in the order of ``items``
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(jobs, len(items))
    logger.debug("dispatching %d tasks to %d workers", len(items), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
