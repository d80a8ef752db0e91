"""Choosing the number of flats from the within-cluster error curve.

Running a clusterer for K = 1..K_max gives a decreasing error curve W_K; the
true model order shows up as the sharpest elbow of log W_K, located by the
second-order difference ln W_{K-1} + ln W_{K+1} - 2 ln W_K.
"""

import numpy as np

from .geometry import as_point_array, fit_flat
from .kflats import kflats
from .lbf import lbf_cluster
from .scale import ScaleParams
from .slbf import slbf_cluster
from .utils import spawn_rngs

__all__ = ["wk_curve", "sod_values", "estimate_k"]

_ALGORITHMS = ("lbf", "slbf", "kflats")


def _within_error(X, labels, flats, dim):
    """Sum of squared distances of points to their assigned cluster's flat."""
    labels = np.asarray(labels)
    total = 0.0
    for k in range(len(flats)):
        members = X[labels == k]
        if members.shape[0]:
            total += float(np.sum(flats[k].distance(members) ** 2))
    return total


def wk_curve(X, dim, k_max, algorithm="lbf", scale=None, seed=None, threads=1, **kwargs):
    """Within-cluster squared error for each candidate cluster count.

    Runs the chosen algorithm with default parameters for K = 1..k_max and
    measures the squared distance of every point to its assigned flat (the
    flats the algorithm itself returns; for the spectral variant, per-cluster
    refits). Values are floored at machine epsilon times the squared data
    diameter so later log processing is safe.

    Returns
    -------
    ndarray of shape (k_max,)
        ``wk[K-1]`` is the error with K clusters.
    """
    X = as_point_array(X)
    if k_max < 3:
        raise ValueError(f"k_max must be >= 3, got {k_max}")
    if algorithm not in _ALGORITHMS:
        raise ValueError(f"algorithm must be one of {_ALGORITHMS}, got {algorithm!r}")
    params = scale if scale is not None else ScaleParams(d=dim)
    rngs = spawn_rngs(seed, k_max)
    wk = np.empty(k_max)
    for k in range(1, k_max + 1):
        rng = rngs[k - 1]
        if algorithm == "lbf":
            labels, flats, _ = lbf_cluster(
                X, k, dim, scale=params, seed=rng.integers(2**32), threads=threads,
                **kwargs,
            )
        elif algorithm == "slbf":
            labels, _ = slbf_cluster(
                X, k, dim, scale=params, seed=rng.integers(2**32), threads=threads,
                **kwargs,
            )
            flats = [
                fit_flat(X[labels == j], dim) for j in range(k) if np.any(labels == j)
            ]
            labels = _compact_labels(labels, k)
        else:
            labels, flats, _ = kflats(
                X, k, dim, scale=params, seed=rng.integers(2**32), **kwargs
            )
        wk[k - 1] = _within_error(X, labels, flats, dim)
    floor = np.finfo(np.float64).eps * float(np.linalg.norm(np.ptp(X, axis=0))) ** 2
    return np.maximum(wk, floor)


def _compact_labels(labels, k):
    """Renumber labels so nonempty clusters are 0..m-1 in first-seen order of id."""
    present = [j for j in range(k) if np.any(labels == j)]
    mapping = {j: i for i, j in enumerate(present)}
    return np.array([mapping[int(l)] for l in labels], dtype=np.int64)


def sod_values(wk, floor=None):
    """Second-order difference of ``log wk`` at each interior cluster count.

    Entry i corresponds to K = i + 2. Non-positive values of ``wk`` are
    floored (default: machine epsilon times ``max(wk)``) before taking logs.
    """
    wk = np.asarray(wk, dtype=np.float64)
    if wk.ndim != 1 or wk.shape[0] < 3:
        raise ValueError("need a 1-D error curve with at least 3 entries")
    if floor is None:
        floor = np.finfo(np.float64).eps * float(wk.max())
        if floor <= 0:
            floor = np.finfo(np.float64).tiny
    if floor <= 0:
        raise ValueError("floor must be positive")
    logs = np.log(np.maximum(wk, floor))
    return logs[:-2] + logs[2:] - 2.0 * logs[1:-1]


def estimate_k(wk, floor=None):
    """Cluster count at the sharpest elbow of the error curve.

    The estimate maximizes the second-order difference of ``log wk`` over
    K = 2 .. len(wk) - 1; ties go to the smallest K. Invariant to rescaling
    the curve by a positive constant.
    """
    return int(np.argmax(sod_values(wk, floor))) + 2
