"""Deterministic block-parallel Monte Carlo.

Trials are cut into fixed-size blocks; block ``i`` always draws from
``stream.spawn(i)``.  Results come back in block order, so any aggregate
is independent of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, TypeVar

import numpy as np

from .sampling import RngStream

BLOCK_SIZE = 2048

T = TypeVar("T")


def block_sizes(n_items: int, block_size: int = BLOCK_SIZE) -> List[int]:
    full, rest = divmod(n_items, block_size)
    return [block_size] * full + ([rest] if rest else [])


def run_blocks(
    fn: Callable[[np.random.Generator, int, int], T],
    n_items: int,
    stream: RngStream,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> List[T]:
    """Call ``fn(rng, block_index, block_len)`` for every block, in order."""
    if not isinstance(stream, RngStream):
        raise TypeError("block-parallel runs need an addressable RngStream")
    sizes = block_sizes(n_items, block_size)

    def task(i: int) -> T:
        return fn(stream.spawn(i).generator(), i, sizes[i])

    if workers <= 1 or len(sizes) <= 1:
        return [task(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(len(sizes))))
