"""Order-preserving map over independent tasks.

Every caller derives per-task randomness from ``(seed, task index)`` before
dispatch, so the thread count never changes a result.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


def task_rng(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), *map(int, index)])


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
