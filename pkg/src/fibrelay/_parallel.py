"""Replica fan-out helper.

Replicas are embarrassingly parallel; results are always reduced in
ascending stream-id order, so outputs are identical for any worker count.
"""
from __future__ import annotations

import multiprocessing
import os
from concurrent.futures import ProcessPoolExecutor

_ENV_WORKERS = "FIBRELAY_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(_ENV_WORKERS, "1")))
    except ValueError:
        return 1


def map_ordered(fn, payloads, workers: int = 1):
    """Map fn over payloads, preserving payload order in the result list."""
    payloads = list(payloads)
    if workers <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    try:
        ctx = multiprocessing.get_context("fork")
    except ValueError:  # pragma: no cover - non-POSIX fallback
        ctx = multiprocessing.get_context()
    with ProcessPoolExecutor(max_workers=min(workers, len(payloads)),
                             mp_context=ctx) as pool:
        return list(pool.map(fn, payloads))
