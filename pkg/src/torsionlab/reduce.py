"""Deterministic summation and ordered parallel maps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")


CHUNK = 4096


def stable_sum(values) -> float:
    """Order-fixed sum: pairwise within 4096-element blocks, exact across blocks.

    The result depends only on the input array, never on worker count.
    """
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size <= CHUNK:
        return math.fsum(arr.tolist())
    full = arr.size // CHUNK * CHUNK
    parts = arr[:full].reshape(-1, CHUNK).sum(axis=1).tolist()
    parts.extend(arr[full:].tolist())
    return math.fsum(parts)


def kahan_sum(values: Iterable[float]) -> float:
    total = 0.0
    comp = 0.0
    for x in values:
        y = x - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def chunked_sum(values, chunk: int = CHUNK) -> float:
    """Sum in fixed-size chunks merged in order (same result for any worker count)."""
    arr = np.asarray(values, dtype=float).ravel()
    parts = [stable_sum(arr[i:i + chunk]) for i in range(0, arr.size, chunk)]
    return math.fsum(parts)


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("TORSIONLAB_THREADS")
        threads = int(env) if env else 1
    return max(1, int(threads))


def ordered_map(fn: Callable[[T], R], items: Sequence[T], threads: int | None = None) -> list[R]:
    """map() over a worker pool; results come back in input order."""
    threads = resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
