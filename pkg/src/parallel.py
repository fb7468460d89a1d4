"""Deterministic chunked execution of data-parallel loops.

Work is always split into chunks whose boundaries depend only on the problem
size, never on the worker count, and BLAS is pinned to a single thread while
chunks run. Results are therefore bitwise identical for any ``--threads``.
"""

import logging
import os
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import TypeVar

from threadpoolctl import threadpool_limits

from src.config import RuntimeSettings

log = logging.getLogger(__name__)

T = TypeVar("T")

_threads: int | None = None


def set_threads(threads: int | None) -> None:
    """Cap the number of worker threads; ``None`` falls back to the environment, then to all cores."""
    global _threads
    if threads is not None and threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    _threads = threads
    log.debug("Worker cap set to %s", threads)


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env_threads = RuntimeSettings.from_env().threads
    if env_threads is not None:
        return env_threads
    return os.cpu_count() or 1


def chunk_slices(total: int, chunk: int) -> list[slice]:
    """Split ``range(total)`` into consecutive slices of length ``chunk`` (the last may be shorter)."""
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    return [slice(start, min(start + chunk, total)) for start in range(0, total, chunk)]


@contextmanager
def _single_threaded_blas() -> Iterator[None]:
    with threadpool_limits(limits=1, user_api="blas"):
        yield


def map_chunks(func: Callable[[slice], T], total: int, chunk: int) -> Iterator[T]:
    """Apply ``func`` to every chunk of ``range(total)`` and yield the results in chunk order.

    Parameters
    ----------
    func
        Pure function of a slice; it must not mutate shared state.
    total
        Number of items.
    chunk
        Items per chunk; fixed by the caller so the split does not depend on the worker count.
    """
    slices = chunk_slices(total, chunk)
    workers = min(get_threads(), max(len(slices), 1))
    log.debug("Running %d chunk(s) of %d item(s) on %d worker(s)", len(slices), chunk, workers)

    with _single_threaded_blas():
        if workers <= 1:
            for sl in slices:
                yield func(sl)
            return
        with ThreadPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(func, slices)
