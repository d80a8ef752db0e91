"""Seeded Lloyd K-means with canonical, index-free tie handling.

Rows are sorted lexicographically before clustering and final cluster ids are
ordered by centroid, so for a fixed seed the output labeling is equivariant
under permutations of the input rows.
"""

import numpy as np

from .geometry import as_point_array
from .utils import spawn_rngs

__all__ = ["kmeans"]

_TOL = 1e-9
_MAX_ITER = 100


def _sq_dists(X, centroids):
    d2 = (
        np.einsum("ij,ij->i", X, X)[:, None]
        - 2.0 * X @ centroids.T
        + np.einsum("ij,ij->i", centroids, centroids)[None, :]
    )
    return np.clip(d2, 0.0, None)


def _lloyd(X, n_clusters, rng):
    n = X.shape[0]
    centroids = X[rng.choice(n, size=n_clusters, replace=False)].copy()
    labels = np.full(n, -1)
    wcss = np.inf
    for _ in range(_MAX_ITER):
        d2 = _sq_dists(X, centroids)
        labels = np.argmin(d2, axis=1)
        point_err = d2[np.arange(n), labels]
        # Re-seed empty clusters from the worst-fit points, one each.
        for k in range(n_clusters):
            if not np.any(labels == k):
                j = int(np.argmax(point_err))
                labels[j] = k
                point_err[j] = -1.0
        new_wcss = 0.0
        for k in range(n_clusters):
            members = labels == k
            centroids[k] = X[members].mean(axis=0)
            new_wcss += float(((X[members] - centroids[k]) ** 2).sum())
        if wcss - new_wcss <= _TOL * max(wcss if np.isfinite(wcss) else 0.0, 1e-300):
            wcss = new_wcss
            break
        wcss = new_wcss
    return labels, centroids, wcss


def kmeans(X, n_clusters, n_restarts=10, seed=None):
    """Cluster rows into ``n_clusters`` groups, best of ``n_restarts`` Lloyd runs.

    Each restart initializes centroids at distinct rows chosen uniformly at
    random; runs iterate to a relative tolerance of 1e-9 or 100 iterations and
    the restart with the smallest within-cluster sum of squares wins. Cluster
    ids are ordered by lexicographic centroid order.

    Returns
    -------
    labels : ndarray of shape (n,)
        Integers in ``0 .. n_clusters - 1``.
    """
    X = as_point_array(X)
    n = X.shape[0]
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if n < n_clusters:
        raise ValueError(f"cannot split {n} points into {n_clusters} clusters")
    if n_clusters == 1:
        return np.zeros(n, dtype=np.int64)

    canon = np.lexsort(X.T[::-1])
    Xs = X[canon]
    best = None
    for rng in spawn_rngs(seed, n_restarts):
        labels, centroids, wcss = _lloyd(Xs, n_clusters, rng)
        if best is None or wcss < best[2]:
            best = (labels, centroids, wcss)
    labels, centroids, _ = best

    rank = np.empty(n_clusters, dtype=np.int64)
    rank[np.lexsort(centroids.T[::-1])] = np.arange(n_clusters)
    out = np.empty(n, dtype=np.int64)
    out[canon] = rank[labels]
    return out
