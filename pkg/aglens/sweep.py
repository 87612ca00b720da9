"""Partitioned evaluation of exhaustive checks and grid sweeps.

Work is split into chunks and processed by an ordered aiostream pipeline,
each chunk running in a worker thread. Results come back in input order,
so the outcome of a sweep never depends on the number of jobs.
"""

from __future__ import annotations

import asyncio
import logging
import os
from typing import Callable, Iterable, Optional, TypeVar

from aiostream import pipe, stream
from aiostream.core import Stream

__all__ = [
    "JOBS_ENV",
    "resolve_jobs",
    "scan_failures",
    "first_failure",
    "map_chunks",
]

logger = logging.getLogger(__name__)

T = TypeVar("T")
F = TypeVar("F")
R = TypeVar("R")

JOBS_ENV = "AGL_JOBS"
CASE_CHUNK = 512
SAMPLE_CHUNK = 65536


def resolve_jobs(jobs: int | None = None) -> int:
    """Resolve the worker count.

    ``None`` falls back on the ``AGL_JOBS`` environment variable, then on 1.
    """
    if jobs is None:
        raw = os.environ.get(JOBS_ENV, "").strip()
        if not raw:
            return 1
        try:
            jobs = int(raw)
        except ValueError:
            raise ValueError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None
    if jobs < 1:
        raise ValueError("The job count must be None or greater than 0")
    return jobs


def _check_chunk(check: Callable[[T], Optional[F]], chunk: list[T]) -> list[F]:
    for case in chunk:
        failure = check(case)
        if failure is not None:
            return [failure]
    return []


def scan_failures(
    cases: Iterable[T],
    check: Callable[[T], Optional[F]],
    jobs: int,
    chunk_size: int = CASE_CHUNK,
) -> Stream[list[F]]:
    """Stream the failures of each chunk of cases, in chunk order.

    Each item holds at most one failure, the first of its chunk.
    """

    async def offload(chunk: list[T]) -> list[F]:
        return await asyncio.to_thread(_check_chunk, check, chunk)

    return (
        stream.iterate(cases)
        | pipe.chunks(chunk_size)
        | pipe.map(offload, ordered=True, task_limit=jobs)
    )


async def _first_failure(
    cases: Iterable[T],
    check: Callable[[T], Optional[F]],
    jobs: int,
    chunk_size: int,
) -> F | None:
    xs = scan_failures(cases, check, jobs, chunk_size)
    async with xs.stream() as streamer:
        async for failures in streamer:
            if failures:
                return failures[0]
    return None


def first_failure(
    cases: Iterable[T],
    check: Callable[[T], Optional[F]],
    jobs: int | None = None,
    chunk_size: int = CASE_CHUNK,
) -> F | None:
    """Return the failure reported for the earliest failing case, or ``None``.

    ``check`` returns ``None`` for a passing case. With more than one job,
    the cases are checked concurrently in worker threads and the earliest
    failure in enumeration order still wins. This function runs its own
    event loop and must not be called from a running one.
    """
    jobs = resolve_jobs(jobs)
    if jobs == 1:
        for case in cases:
            failure = check(case)
            if failure is not None:
                return failure
        return None
    logger.debug("Checking cases with %d jobs (chunks of %d)", jobs, chunk_size)
    return asyncio.run(_first_failure(cases, check, jobs, chunk_size))


async def _map_slices(
    func: Callable[[slice], R], slices: list[slice], jobs: int
) -> list[R]:
    async def offload(part: slice) -> R:
        return await asyncio.to_thread(func, part)

    xs = stream.iterate(slices) | pipe.map(offload, ordered=True, task_limit=jobs)
    return await stream.list(xs)


def map_chunks(
    func: Callable[[slice], R],
    size: int,
    jobs: int | None = None,
    chunk_size: int = SAMPLE_CHUNK,
) -> list[R]:
    """Apply ``func`` to consecutive slices covering ``range(size)``.

    The results are returned in slice order, ready to be concatenated.
    """
    if chunk_size < 1:
        raise ValueError("The chunk size must be greater than 0")
    jobs = resolve_jobs(jobs)
    slices = [
        slice(start, min(start + chunk_size, size))
        for start in range(0, size, chunk_size)
    ] or [slice(0, 0)]
    if jobs == 1 or len(slices) == 1:
        return [func(part) for part in slices]
    logger.debug(
        "Sweeping %d samples in %d slices with %d jobs", size, len(slices), jobs
    )
    return asyncio.run(_map_slices(func, slices, jobs))
