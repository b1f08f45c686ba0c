"""Counter-based random streams keyed by (master seed, purpose, index).

Each Monte Carlo sample draws from its own Philox stream, so results do not
depend on how samples are split across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

OVERLAP = 1
LYAPUNOV = 2
CLOUD = 3
PIVOTS = 4
FIXTURE = 5

T = TypeVar("T")


def stream(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError("seeds are unsigned integers")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(purpose), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def map_ordered(fn: Callable[[int], T], indices: Sequence[int], workers: int = 1) -> list[T]:
    """``[fn(i) for i in indices]``, optionally on a thread pool; order is preserved."""
    if workers <= 1:
        return [fn(i) for i in indices]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices))
