"""Worker-count resolution and order-preserving parallel map.

Parallelism never changes results: tasks are pure functions of their inputs
and outputs are merged in submission order.  RFX_THREADS caps the worker
count (1 disables threading entirely).
"""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    env = os.environ.get("RFX_THREADS")
    cpus = os.cpu_count() or 1
    if env:
        try:
            return max(1, min(int(env), cpus))
        except ValueError:
            return cpus
    return cpus


def map_in_order(fn, items, workers=None):
    """Apply fn to items, possibly in parallel, returning results in order."""
    items = list(items)
    w = worker_count() if workers is None else workers
    if w <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))
