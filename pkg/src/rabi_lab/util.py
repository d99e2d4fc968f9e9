"""Small shared helpers: worker-pool sizing and deterministic parallel maps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ValidationError

__all__ = ["worker_count", "parallel_map"]

_THREADS_ENV = "RABI_LAB_THREADS"


def worker_count() -> int:
    """Worker cap from the RABI_LAB_THREADS environment variable (default: hardware)."""
    raw = os.environ.get(_THREADS_ENV, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValidationError(f"{_THREADS_ENV} must be an integer, got {raw!r}") from exc
        if n < 1:
            raise ValidationError(f"{_THREADS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn, items) -> list:
    """Map fn over items with a bounded thread pool, preserving input order.

    The compute kernels release the GIL inside LAPACK, so threads help for
    sweeps; with one worker (or one item) this degrades to a plain map.
    """
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
