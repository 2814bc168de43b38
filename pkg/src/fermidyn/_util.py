"""Small shared helpers."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "thread_map"]


def thread_count() -> int:
    """Worker cap from FERMIDYN_THREADS; defaults to 1 (serial)."""
    try:
        return max(1, int(os.environ.get("FERMIDYN_THREADS", "1")))
    except ValueError:
        return 1


def thread_map(fn, items):
    """Ordered map over items, threaded when FERMIDYN_THREADS > 1.

    Results are collected in input order, so reductions downstream stay
    deterministic regardless of the worker count.
    """
    items = list(items)
    workers = thread_count()
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
