"""Bounded thread-pool map with deterministic accumulation order.

Metric engines reduce per-image results with order-independent integer sums,
but consuming results in submission order keeps even float-sensitive callers
deterministic for any job count, and the bounded in-flight window keeps
memory at O(jobs) records for streaming inputs.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_consume(
    items: Iterable[T],
    work: Callable[[T], R],
    consume: Callable[[R], None],
    jobs: int = 1,
) -> None:
    """Apply ``work`` to each item, feeding results to ``consume`` in input order."""
    jobs = max(1, int(jobs))
    if jobs == 1:
        for item in items:
            consume(work(item))
        return
    window = 4 * jobs
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        pending: deque = deque()
        for item in items:
            pending.append(pool.submit(work, item))
            if len(pending) >= window:
                consume(pending.popleft().result())
        while pending:
            consume(pending.popleft().result())
