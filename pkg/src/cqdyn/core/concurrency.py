"""Bounded worker pool for independent, order-preserving work items."""

from collections.abc import Callable, Iterable
from concurrent.futures import ThreadPoolExecutor

from cqdyn.core.config import settings


def parallel_map[T, R](fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Apply ``fn`` to every item, preserving input order.

    Results are collected in submission order, so reductions over the
    returned list do not depend on the worker count.

    Args:
        fn: Function applied to each item; must be safe for concurrent calls
        items: Work items
        threads: Worker cap; defaults to ``settings.threads``

    Returns:
        List of results in the order of ``items``
    """
    work = list(items)
    workers = min(threads or settings.threads, max(len(work), 1))
    if workers <= 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, work))
