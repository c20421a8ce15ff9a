"""Ordered data-parallel map capped by MEDAX_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("MEDAX_THREADS", "1") or 1)
    return max(1, threads)


def ordered_map(fn, items, threads: int | None = None) -> list:
    """``list(map(fn, items))``, possibly on a thread pool; order is preserved."""
    items = list(items)
    workers = thread_count(threads)
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
