"""Fan-out of trajectory index ranges over worker threads.

Kernels are compiled with ``nogil=True`` and every trajectory draws from its
own stream, so the result of a batch is independent of how the range is cut.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

DEFAULT_CHUNK = 16384


def chunks(count: int, chunk: int = DEFAULT_CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(count, lo + chunk)) for lo in range(0, count, chunk)]


def map_ranges(fn: Callable[[int, int], Sequence[np.ndarray]], count: int,
               workers: int = 1, chunk: int = DEFAULT_CHUNK) -> tuple[np.ndarray, ...]:
    """Call ``fn(lo, hi)`` on consecutive ranges and concatenate the outputs.

    ``fn`` returns a tuple of arrays indexed by trajectory.
    """
    parts = chunks(count, chunk)
    if not parts:
        out = fn(0, 0)
        return tuple(np.asarray(a) for a in out)
    if workers <= 1 or len(parts) == 1:
        results = [fn(lo, hi) for lo, hi in parts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda r: fn(*r), parts))
    return tuple(np.concatenate(cols) for cols in zip(*results))
