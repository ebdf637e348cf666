"""Deterministic seeding and an optional process pool for per-image work."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

WORKERS_ENV = "PHANTOMEVAL_WORKERS"


def child_seed(master_seed: int, index: int, stream: int = 0) -> np.random.SeedSequence:
    """Counter-based seed for item `index`; independent of processing order."""
    return np.random.SeedSequence(entropy=(int(master_seed), int(index), int(stream)))


def child_rng(master_seed: int, index: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(child_seed(master_seed, index, stream))


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn: Callable[[T], R], items: Sequence[T] | Iterable[T], workers: int | None = None) -> list[R]:
    """Map `fn` over `items`, preserving order. `fn` must be picklable when workers > 1."""
    items = list(items)
    if workers is None:
        workers = default_workers()
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
