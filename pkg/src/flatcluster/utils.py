"""Shared helpers: RNG handling, input validation, tiny numerics."""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.utils import check_array

__all__ = [
    "as_rng",
    "as_seedseq",
    "spawn_rngs",
    "check_points",
    "lower_median",
    "resolve_threads",
    "parallel_map",
]


def as_rng(seed):
    """Coerce ``seed`` (None, int, SeedSequence, or Generator) to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def as_seedseq(seed):
    """Coerce ``seed`` to a SeedSequence suitable for spawning children.

    A Generator is consumed for one draw of entropy, so repeated calls on the
    same Generator give fresh, reproducible sequences.
    """
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


def spawn_rngs(seed, n):
    """Derive ``n`` independent child generators from one seed.

    Children are tied to the parent seed only, not to each other, so work
    units seeded this way give results independent of scheduling order.
    """
    return [np.random.default_rng(child) for child in as_seedseq(seed).spawn(n)]


def check_points(X, min_rows=1):
    """Validate a 2-D finite point array, one point per row."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_all_finite=True)
    if X.shape[0] < min_rows:
        raise ValueError(f"need at least {min_rows} points, got {X.shape[0]}")
    return X


def lower_median(values):
    """Median taking the lower of the two middle values when the count is even."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("lower_median of empty sequence")
    return float(np.partition(values, (values.size - 1) // 2)[(values.size - 1) // 2])


def resolve_threads(threads=None):
    """Thread count: explicit value, else FLATCLUSTER_THREADS, else cpu count."""
    if threads is not None:
        n = int(threads)
    else:
        env = os.environ.get("FLATCLUSTER_THREADS", "")
        n = int(env) if env.strip() else (os.cpu_count() or 1)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    return n


def parallel_map(fn, items, threads=1):
    """Map ``fn`` over ``items``, preserving order.

    Each item must be computed independently (own seed) so the result does
    not depend on the thread count.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
