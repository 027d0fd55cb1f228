"""Deterministic replica-parallel execution."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")


def replica_map(fn: Callable[[int], T], replicas: int, threads: int = 1) -> list[T]:
    """``[fn(0), ..., fn(replicas - 1)]`` in replica order whatever the pool size.

    Each replica derives its own seed from its index, so results do not
    depend on scheduling.
    """
    if threads <= 1 or replicas <= 1:
        return [fn(i) for i in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicas)))
