"""Ordered process-pool map used by parameter sweeps.

The worker count comes from the ``PRETHERMAL_WORKERS`` environment variable
(default 1, i.e. run in-process).  Results are always returned in input order,
so sweeps are deterministic regardless of scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

ENV_WORKERS = "PRETHERMAL_WORKERS"


def worker_count(workers: int | None = None) -> int:
    if workers is None:
        raw = os.environ.get(ENV_WORKERS, "1")
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_WORKERS} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def ordered_map(fn, items, workers: int | None = None) -> list:
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
