"""Seeded substreams and worker-count-independent chunked reductions.

Monte Carlo work is cut into fixed-size chunks of sample indices. Chunk ``c``
always draws from the same substream, whichever worker runs it, and partial
results are reduced in chunk order, so any worker count gives bit-identical
output.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

import numpy as np

CHUNK_SIZE = 2048

T = TypeVar("T")


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required")
    return np.random.SeedSequence(int(seed))


def substream(seed, *key: int) -> np.random.SeedSequence:
    """Child sequence addressed by ``key``; pure, unlike ``SeedSequence.spawn``."""
    ss = as_seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def chunk_map(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed,
    workers: int = 1,
    chunk_size: int = CHUNK_SIZE,
) -> list[T]:
    """Run ``fn(rng, size)`` on every chunk of ``total`` samples, in chunk order."""
    if total < 1:
        raise ValueError("need at least one sample")
    sizes = [min(chunk_size, total - s) for s in range(0, total, chunk_size)]
    jobs = [(np.random.default_rng(substream(seed, c)), size) for c, size in enumerate(sizes)]
    if workers <= 1 or len(jobs) == 1:
        return [fn(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def moments(values: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """(count, mean, sum of squared deviations) along axis 0."""
    values = np.asarray(values, dtype=float)
    # shift by the first row so constant data give an exact mean and zero spread
    shift = values[0]
    dev = values - shift
    mean = shift + dev.mean(axis=0)
    return len(values), mean, ((dev - (mean - shift)) ** 2).sum(axis=0)


def combine_moments(parts):
    """Merge per-chunk moments left to right (pairwise update of mean and spread)."""
    it = iter(parts)
    n, mean, m2 = next(it)
    for nb, mb, m2b in it:
        tot = n + nb
        delta = mb - mean
        mean = mean + delta * (nb / tot)
        m2 = m2 + m2b + delta**2 * (n * nb / tot)
        n = tot
    return n, mean, m2
