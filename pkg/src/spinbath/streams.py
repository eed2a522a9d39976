"""Reproducible parallel randomness built on counter-based Philox streams.

Every stochastic routine derives its generator from a root seed plus an
integer path (for example ``(config_index,)``), so results are
bit-identical regardless of how work is chunked across workers.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for ``(seed, path)``.

    Streams with different paths are statistically independent; the same
    ``(seed, path)`` always yields the same sequence.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seed=ss))


def chunk_ranges(n: int, chunks: int):
    """Split ``range(n)`` into at most ``chunks`` contiguous pieces."""
    chunks = max(1, min(chunks, n)) if n else 1
    bounds = np.linspace(0, n, chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def indexed_map(fn, n: int, workers: int = 1):
    """Evaluate ``fn(start, stop) -> array`` over ``range(n)`` in chunks.

    Results are concatenated in index order, so the output is independent
    of the worker count by construction.
    """
    spans = chunk_ranges(n, workers if workers > 1 else 1)
    if workers <= 1 or len(spans) == 1:
        parts = [fn(a, b) for a, b in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda span: fn(*span), spans))
    return np.concatenate(parts, axis=0)
