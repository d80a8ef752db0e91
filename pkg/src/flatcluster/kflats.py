"""K-flats: alternating assignment and per-cluster flat refitting.

The classical iteration is sensitive to its starting flats. Besides a random
start, a farthest-insertion initializer is provided: grow a flat at a random
point, then repeatedly fit a new flat at the point farthest from the union of
those found so far. Its neighborhoods are either a fixed point count or sized
automatically by the local flatness scan, which shrinks them near flat
intersections where large neighborhoods would mix clusters.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import as_point_array, fit_flat
from .scale import ScaleParams, select_neighborhood
from .utils import spawn_rngs

__all__ = ["farthest_insertion_init", "kflats", "KFlats"]

_INIT_MODES = ("random", "farthest_fixed", "farthest_adaptive")
_MAX_ITER = 100


def _neighborhood(X, index, init, neighborhood_size, scale):
    if init == "farthest_fixed":
        d2 = np.einsum("ij,ij->i", X - X[index], X - X[index])
        order = np.argsort(d2, kind="stable")
        return order[:neighborhood_size]
    indices, _ = select_neighborhood(X, index, scale)
    return indices


def farthest_insertion_init(
    X, n_clusters, dim, affine=True, init="farthest_adaptive",
    neighborhood_size=None, scale=None, seed=None,
):
    """Initial flats grown at mutually far-apart points.

    The first flat fits the neighborhood of a random point; each next flat
    fits the neighborhood of the point farthest from the union of flats found
    so far.
    """
    X = as_point_array(X)
    if init not in ("farthest_fixed", "farthest_adaptive"):
        raise ValueError(f"init must be farthest_fixed or farthest_adaptive, got {init!r}")
    if init == "farthest_fixed":
        if neighborhood_size is None or neighborhood_size < dim + 1:
            raise ValueError("farthest_fixed needs neighborhood_size >= dim + 1")
    params = scale if scale is not None else ScaleParams(d=dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    start = int(rng.integers(X.shape[0]))
    flats = []
    union_dist = None
    index = start
    for _ in range(n_clusters):
        nbhd = _neighborhood(X, index, init, neighborhood_size, params)
        flat = fit_flat(X[nbhd], dim, affine=affine)
        flats.append(flat)
        dist = flat.distance(X)
        union_dist = dist if union_dist is None else np.minimum(union_dist, dist)
        index = int(np.argmax(union_dist))
    return flats


def _refit(X, labels, flats, dim, affine, init, neighborhood_size, scale, dists):
    """Per-cluster refits; empty clusters are regrown at the worst-fit point."""
    point_err = dists[np.arange(X.shape[0]), labels].copy()
    new_flats = []
    for k in range(len(flats)):
        members = labels == k
        if members.any():
            new_flats.append(fit_flat(X[members], dim, affine=affine))
        else:
            worst = int(np.argmax(point_err))
            point_err[worst] = -1.0
            nbhd = _neighborhood(X, worst, init, neighborhood_size, scale)
            new_flats.append(fit_flat(X[nbhd], dim, affine=affine))
    return new_flats


def kflats(
    X, n_clusters, dim, affine=True, init="farthest_adaptive",
    neighborhood_size=None, scale=None, max_iter=_MAX_ITER, seed=None,
):
    """Alternating minimization of the total squared distance to K flats.

    Parameters
    ----------
    X : PointCloud or array-like of shape (N, D)
    n_clusters, dim : int
    affine : bool, default True
        Fit affine flats; if False, flats pass through the origin.
    init : {"random", "farthest_fixed", "farthest_adaptive"}
        Random membership, or farthest insertion with fixed-size or
        automatically sized neighborhoods.
    neighborhood_size : int, optional
        Point count for ``farthest_fixed`` (also used to regrow empty
        clusters in that mode).
    scale : ScaleParams, optional
        Scan parameters for ``farthest_adaptive``.
    max_iter : int, default 100
    seed : int, optional

    Returns
    -------
    labels : ndarray of shape (N,)
    flats : list of Flat
    trace : ndarray
        Objective (sum of squared distances) after each assignment step;
        non-increasing.
    """
    X = as_point_array(X)
    n = X.shape[0]
    if init not in _INIT_MODES:
        raise ValueError(f"init must be one of {_INIT_MODES}, got {init!r}")
    if n < n_clusters:
        raise ValueError(f"cannot split {n} points into {n_clusters} clusters")
    params = scale if scale is not None else ScaleParams(d=dim)
    rng = np.random.default_rng(seed)

    if init == "random":
        labels = rng.integers(n_clusters, size=n)
        labels[rng.permutation(n)[:n_clusters]] = np.arange(n_clusters)
        flats = [
            fit_flat(X[labels == k], dim, affine=affine) for k in range(n_clusters)
        ]
        repair_mode = "farthest_adaptive"
    else:
        flats = farthest_insertion_init(
            X, n_clusters, dim, affine=affine, init=init,
            neighborhood_size=neighborhood_size, scale=params, seed=rng,
        )
        repair_mode = init

    labels = np.full(n, -1)
    trace = []
    for _ in range(max_iter):
        dists = np.stack([f.distance(X) for f in flats], axis=1)
        new_labels = np.argmin(dists, axis=1)
        objective = float(np.sum(dists[np.arange(n), new_labels] ** 2))
        if trace and objective > trace[-1] * (1 + 1e-9) + 1e-12:
            raise AssertionError("K-flats objective increased")
        trace.append(objective)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        flats = _refit(
            X, labels, flats, dim, affine, repair_mode, neighborhood_size, params, dists
        )
    return labels, flats, np.array(trace)


class KFlats(ClusterMixin, BaseEstimator):
    """K-flats estimator with restarts and selectable initialization.

    Parameters
    ----------
    n_clusters : int, default 2
    dim : int, default 1
    affine : bool, default True
    init : {"farthest_adaptive", "farthest_fixed", "random"}
    neighborhood_size : int, optional
        Required for ``farthest_fixed``.
    start_size, step_size, allow_first_scale, max_neighbors :
        Scan parameters for the adaptive initializer.
    n_restarts : int, default 1
        Independent runs; the labeling with the smallest objective wins.
    max_iter : int, default 100
    random_state : int, optional

    Attributes
    ----------
    labels_ : ndarray of shape (N,)
    flats_ : list of Flat
    objective_ : float
    objective_trace_ : ndarray
    """

    def __init__(
        self,
        n_clusters=2,
        dim=1,
        affine=True,
        init="farthest_adaptive",
        neighborhood_size=None,
        start_size=None,
        step_size=2,
        allow_first_scale=False,
        max_neighbors=None,
        n_restarts=1,
        max_iter=_MAX_ITER,
        random_state=None,
    ):
        self.n_clusters = n_clusters
        self.dim = dim
        self.affine = affine
        self.init = init
        self.neighborhood_size = neighborhood_size
        self.start_size = start_size
        self.step_size = step_size
        self.allow_first_scale = allow_first_scale
        self.max_neighbors = max_neighbors
        self.n_restarts = n_restarts
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        X = as_point_array(X)
        scale = ScaleParams(
            d=self.dim,
            start_size=self.start_size,
            step_size=self.step_size,
            allow_first_scale=self.allow_first_scale,
            max_neighbors=self.max_neighbors,
        )
        best = None
        for rng in spawn_rngs(self.random_state, self.n_restarts):
            labels, flats, trace = kflats(
                X, self.n_clusters, self.dim, affine=self.affine, init=self.init,
                neighborhood_size=self.neighborhood_size, scale=scale,
                max_iter=self.max_iter, seed=rng,
            )
            if best is None or trace[-1] < best[2][-1]:
                best = (labels, flats, trace)
        self.labels_, self.flats_, self.objective_trace_ = best
        self.objective_ = float(self.objective_trace_[-1])
        return self

    def predict(self, X):
        check_is_fitted(self, "flats_")
        X = as_point_array(X)
        dists = np.stack([f.distance(X) for f in self.flats_], axis=1)
        return np.argmin(dists, axis=1)
