"""Thread-level parallelism capped by the ``ROUGHDRIVE_THREADS`` environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "ROUGHDRIVE_THREADS"


def max_threads() -> int:
    """Worker cap: ``ROUGHDRIVE_THREADS`` if set (>= 1), else the CPU count."""
    cpus = os.cpu_count() or 1
    raw = os.environ.get(ENV_VAR)
    if raw is None or raw.strip() == "":
        return cpus
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
    return cap


def parallel_map(fn, items) -> list:
    """Ordered ``map`` over ``items`` on at most :func:`max_threads` threads."""
    items = list(items)
    workers = min(max_threads(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
