"""Worker-count control for ensemble training.

Members are independent; each draws from its own RNG stream derived from
``(train_seed, member_index)``, so results do not depend on scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_max_workers = os.cpu_count() or 1


def set_threads(n: int | None) -> None:
    global _max_workers
    _max_workers = max(1, n) if n else (os.cpu_count() or 1)


def get_threads() -> int:
    return _max_workers


def parallel_map(fn, items):
    items = list(items)
    if _max_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_max_workers) as pool:
        return list(pool.map(fn, items))
