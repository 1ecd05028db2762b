"""Deterministic random streams.

A single run seed expands into independent per-task streams keyed by
integer indices.  Because every sample index owns its own stream, batch
loops give identical results no matter how they are split across
workers.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def subrng(seed, *indices):
    """Generator for task (seed, i1, i2, ...); stable across processes."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


def worker_count():
    """Worker cap from NPCH_THREADS (default 1 = sequential)."""
    try:
        return max(1, int(os.environ.get("NPCH_THREADS", "1")))
    except ValueError:
        return 1


def map_indexed(fn, n, seed):
    """[fn(i, subrng(seed, i)) for i in range(n)], possibly threaded.

    Results are ordered by index, so the output is identical for any
    worker count.
    """
    workers = worker_count()
    if workers == 1 or n < 4:
        return [fn(i, subrng(seed, i)) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: fn(i, subrng(seed, i)), range(n)))
