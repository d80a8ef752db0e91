"""Spectral clustering on similarities induced by local best-fit flats.

Every point gets a local flat; the affinity between two points is a
symmetrized, locally scaled kernel of how well each point fits the other's
flat. Spectral embedding of the normalized affinity followed by K-means gives
the segmentation; the kernel's scale multiplier is swept and the segmentation
with the smallest total squared fitting error wins.
"""

import numpy as np
import scipy.sparse.linalg
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import as_point_array, fit_flat
from .kmeans import kmeans
from .scale import ScaleParams, _local_fit
from .utils import as_seedseq, parallel_map

__all__ = [
    "local_flats_all",
    "build_similarity",
    "spectral_embed",
    "segmentation_error",
    "slbf_cluster",
    "SLBF",
]

_DEFAULT_LAMBDAS = tuple(2.0 * np.exp(np.arange(7)))
_DENSE_EIG_MAX = 1024


def _range_diameter(X):
    """Cheap upper bound on the data diameter (norm of coordinate ranges)."""
    return float(np.linalg.norm(np.ptp(X, axis=0)))


def local_flats_all(X, scale, threads=1):
    """Local best-fit flat and its RMS neighborhood residual for every point."""
    X = as_point_array(X)
    results = parallel_map(lambda i: _local_fit(X, i, scale)[1:3], range(X.shape[0]), threads)
    flats = [r[0] for r in results]
    residuals = np.array([r[1] for r in results])
    return flats, residuals


def _cross_fit_matrix(X, flats):
    """``A[i, j]`` = distance of point i to point j's local flat."""
    return np.stack([f.distance(X) for f in flats], axis=1)


def _exp_similarity(S, residuals, lam, diameter):
    sigma = lam * residuals
    # Degenerate (zero-residual) local fits get a resolution-level scale.
    floor = lam * np.sqrt(np.finfo(np.float64).eps) * diameter
    sigma = np.maximum(sigma, floor)
    if not np.all(sigma > 0):
        raise ValueError("similarity scales must be positive; is the data a single point?")
    denom = 2.0 * sigma**2
    return np.exp(-S / denom[None, :]) + np.exp(-S / denom[:, None])


def build_similarity(X, flats, residuals, lam):
    """Symmetric affinity matrix from per-point local flats.

    The base dissimilarity is the geometric mean of the two cross-fit
    distances, ``sqrt(dist(x_i, L_j) * dist(x_j, L_i))``; it is passed through
    locally scaled exponential kernels (scale ``lam`` times each point's local
    RMS residual, floored at machine resolution times the data diameter) and
    the two orderings are summed, giving entries in (0, 2].
    """
    X = as_point_array(X)
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    A = _cross_fit_matrix(X, flats)
    S = np.sqrt(A * A.T)
    return _exp_similarity(S, np.asarray(residuals, dtype=np.float64), lam,
                           _range_diameter(X))


def spectral_embed(S_hat, n_clusters, seed=None):
    """Rows of the top eigenvector embedding of a normalized affinity matrix.

    The affinity is symmetrically normalized by row sums; the embedding is
    ``U * sqrt(eigenvalue)`` over the ``n_clusters`` algebraically largest
    eigenpairs, with negative eigenvalues clamped to zero. Row norms are
    bounded by 1.

    Raises
    ------
    ValueError
        If a row sum vanishes (isolated point; the message names its index).
    """
    S_hat = np.asarray(S_hat, dtype=np.float64)
    n = S_hat.shape[0]
    if S_hat.shape != (n, n):
        raise ValueError("affinity matrix must be square")
    if not 1 <= n_clusters <= n:
        raise ValueError(f"need 1 <= n_clusters <= {n}, got {n_clusters}")
    row_sums = S_hat.sum(axis=1)
    dead = np.flatnonzero(row_sums <= 0)
    if dead.size:
        raise ValueError(f"isolated point: row {dead[0]} has zero affinity mass")
    inv_root = 1.0 / np.sqrt(row_sums)
    normalized = S_hat * inv_root[:, None] * inv_root[None, :]
    if n <= _DENSE_EIG_MAX or n_clusters >= n - 1:
        vals, vecs = np.linalg.eigh(normalized)
        vals, vecs = vals[-n_clusters:], vecs[:, -n_clusters:]
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        vals, vecs = scipy.sparse.linalg.eigsh(
            normalized, k=n_clusters, which="LA", v0=v0
        )
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    return vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]


def segmentation_error(X, labels, dim):
    """Total squared distance of each cluster to its own best-fit flat.

    Empty clusters contribute zero, as do clusters too small to determine a
    flat.
    """
    X = as_point_array(X)
    labels = np.asarray(labels, dtype=np.int64)
    total = 0.0
    for k in range(int(labels.max(initial=-1)) + 1):
        members = X[labels == k]
        if members.shape[0] == 0:
            continue
        flat = fit_flat(members, dim, affine=True)
        total += float(np.sum(flat.distance(members) ** 2))
    return total


def slbf_cluster(
    X,
    n_clusters,
    dim,
    lambdas=None,
    scale=None,
    kmeans_restarts=10,
    seed=None,
    threads=1,
):
    """Spectral clustering over local best-fit flats with a scale sweep.

    For each kernel multiplier in ``lambdas`` (default ``2 * e**j`` for
    j = 0..6) the affinity is built, embedded, and K-means clustered; the
    labeling with the smallest total squared fitting error is returned.

    Returns
    -------
    labels : ndarray of shape (N,)
    info : dict
        Keys ``best_lambda``, ``lambda_errors``, ``local_residuals``.
    """
    X = as_point_array(X)
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if X.shape[0] < n_clusters:
        raise ValueError(f"cannot split {X.shape[0]} points into {n_clusters} clusters")
    lambdas = tuple(_DEFAULT_LAMBDAS if lambdas is None else lambdas)
    if len(lambdas) == 0 or any(lam <= 0 for lam in lambdas):
        raise ValueError("lambdas must be a non-empty sequence of positive scales")
    params = scale if scale is not None else ScaleParams(d=dim)

    flats, residuals = local_flats_all(X, params, threads)
    A = _cross_fit_matrix(X, flats)
    S = np.sqrt(A * A.T)
    diameter = _range_diameter(X)

    children = as_seedseq(seed).spawn(len(lambdas))

    def run_one(job):
        lam, child = job
        embed_seed, km_seed = child.spawn(2)
        S_hat = _exp_similarity(S, residuals, lam, diameter)
        embedding = spectral_embed(S_hat, n_clusters, seed=embed_seed)
        labels = kmeans(embedding, n_clusters, n_restarts=kmeans_restarts, seed=km_seed)
        return labels, segmentation_error(X, labels, dim)

    results = parallel_map(run_one, zip(lambdas, children), threads)
    errors = np.array([r[1] for r in results])
    best = int(np.argmin(errors))
    labels = results[best][0]
    info = {
        "best_lambda": float(lambdas[best]),
        "lambda_errors": errors,
        "local_residuals": residuals,
    }
    return labels, info


class SLBF(ClusterMixin, BaseEstimator):
    """Spectral flat-clustering estimator over local best-fit flats.

    Parameters
    ----------
    n_clusters : int, default 2
    dim : int, default 1
        Dimension of the underlying flats.
    lambdas : sequence of float, optional
        Kernel scale multipliers to sweep; default ``2 * e**j``, j = 0..6.
    start_size, step_size, allow_first_scale, max_neighbors :
        Neighborhood-scan parameters, as in :class:`~flatcluster.LBF`.
    kmeans_restarts : int, default 10
    random_state : int, optional
    threads : int, default 1

    Attributes
    ----------
    labels_ : ndarray of shape (N,)
    flats_ : list of Flat
        Per-cluster best-fit flats of the final segmentation.
    best_lambda_ : float
    lambda_errors_ : ndarray
    """

    def __init__(
        self,
        n_clusters=2,
        dim=1,
        lambdas=None,
        start_size=None,
        step_size=2,
        allow_first_scale=False,
        max_neighbors=None,
        kmeans_restarts=10,
        random_state=None,
        threads=1,
    ):
        self.n_clusters = n_clusters
        self.dim = dim
        self.lambdas = lambdas
        self.start_size = start_size
        self.step_size = step_size
        self.allow_first_scale = allow_first_scale
        self.max_neighbors = max_neighbors
        self.kmeans_restarts = kmeans_restarts
        self.random_state = random_state
        self.threads = threads

    def _scale_params(self):
        return ScaleParams(
            d=self.dim,
            start_size=self.start_size,
            step_size=self.step_size,
            allow_first_scale=self.allow_first_scale,
            max_neighbors=self.max_neighbors,
        )

    def fit(self, X, y=None):
        X = as_point_array(X)
        labels, info = slbf_cluster(
            X,
            self.n_clusters,
            self.dim,
            lambdas=self.lambdas,
            scale=self._scale_params(),
            kmeans_restarts=self.kmeans_restarts,
            seed=self.random_state,
            threads=self.threads,
        )
        self.labels_ = labels
        self.best_lambda_ = info["best_lambda"]
        self.lambda_errors_ = info["lambda_errors"]
        self.flats_ = [
            fit_flat(X[labels == k], self.dim, affine=True)
            if np.any(labels == k)
            else fit_flat(X, self.dim, affine=True)
            for k in range(self.n_clusters)
        ]
        return self

    def predict(self, X):
        check_is_fitted(self, "flats_")
        X = as_point_array(X)
        dists = np.stack([f.distance(X) for f in self.flats_], axis=1)
        return np.argmin(dists, axis=1)
