"""Shared plumbing: nested random streams, pattern search, thread pool."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

# Samples are generated in fixed-size chunks, each from its own stream keyed by
# (seed, tag, chunk index). The first n draws therefore do not depend on how
# many draws were requested in total, which makes estimates nested in n.
CHUNK = 1024


def chunk_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(tag), int(index)])


def nested_draw(
    seed: int,
    tag: int,
    count: int,
    draw: Callable[[np.random.Generator, int], np.ndarray],
) -> np.ndarray:
    """Concatenate ``draw(rng, CHUNK)`` over chunk streams and truncate to ``count``."""
    nchunks = max(1, -(-count // CHUNK))
    parts = [draw(chunk_rng(seed, tag, i), CHUNK) for i in range(nchunks)]
    return np.concatenate(parts, axis=0)[:count]


def thread_count() -> int:
    """Worker cap from ``LAB_THREADS`` (0 or unset means ``os.cpu_count()``)."""
    raw = os.environ.get("LAB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n


def ordered_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map in a thread pool; results come back in input order."""
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def pattern_search(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    step: float = 0.1,
    step_min: float = 1e-6,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    max_iter: int = 2000,
) -> tuple[np.ndarray, float]:
    """Deterministic compass search minimizing ``fun``.

    ``fun`` takes a batch ``(m, d)`` and returns ``(m,)`` values (``nan`` or
    ``inf`` marks infeasible points). All 2d coordinate moves are evaluated
    together; the best strict improvement is taken, otherwise the step halves.
    """
    x = np.asarray(x0, dtype=float).copy()
    if project is not None:
        x = project(x[None, :])[0]
    fx = float(fun(x[None, :])[0])
    d = x.size
    eye = np.eye(d)
    it = 0
    while step >= step_min and it < max_iter:
        it += 1
        cand = np.concatenate([x + step * eye, x - step * eye], axis=0)
        if project is not None:
            cand = project(cand)
        vals = np.asarray(fun(cand), dtype=float)
        vals = np.where(np.isfinite(vals), vals, np.inf)
        j = int(np.argmin(vals))
        if vals[j] < fx:
            x, fx = cand[j], float(vals[j])
        else:
            step *= 0.5
    return x, fx


def prefix_records(values: np.ndarray) -> np.ndarray:
    """Indices whose value strictly beats every earlier finite value.

    The records of a prefix are the records of the full array that fall in
    that prefix, so local refinement started from records keeps a max-type
    estimate monotone under nested sample doubling.
    """
    v = np.where(np.isfinite(values), values, -np.inf)
    prev = np.concatenate([[-np.inf], np.maximum.accumulate(v)[:-1]])
    return np.flatnonzero(v > prev)
