"""Ordered parallel map shared by scans and ensembles."""

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import InvalidInputError

THREADS_ENV = "POLCHAIN_THREADS"


def worker_count(requested=None):
    """Number of worker threads, capped by ``POLCHAIN_THREADS`` when set."""
    n = requested if requested is not None else min(8, os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            cap = int(cap)
        except ValueError:
            raise InvalidInputError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
        if cap < 1:
            raise InvalidInputError(f"{THREADS_ENV} must be >= 1, got {cap}")
        n = min(n, cap)
    return max(1, int(n))


def ordered_map(func, items, workers=None):
    """``[func(x) for x in items]`` evaluated on a thread pool.

    Results come back in input order, so downstream reductions do not
    depend on scheduling. LAPACK releases the GIL, which is where the time
    goes.
    """
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
