"""Deterministic process-parallel map used by pair fitting and simulations."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable

ENV_THREADS = "DISCAT_THREADS"


def resolve_threads(requested: int | None = None) -> int:
    """Worker count: the environment variable wins, then the request, then all CPUs."""
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    elif requested:
        n = int(requested)
    else:
        n = os.cpu_count() or 1
    return max(1, n)


def pmap(func: Callable, items: Iterable, threads: int | None = None, chunksize: int = 1) -> list:
    """Apply ``func`` to every item; results are returned in input order."""
    items = list(items)
    n = min(resolve_threads(threads), len(items)) if items else 1
    if n <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(func, items, chunksize=chunksize))
