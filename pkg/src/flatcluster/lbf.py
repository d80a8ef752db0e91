"""Clustering by local best-fit flats and randomized energy minimization.

A pool of candidate flats is fitted to automatically sized neighborhoods of
randomly chosen points. A K-subset of candidates is then improved by repeated
single-flat exchange: remove one flat at random, reinsert the candidate that
minimizes the total distance of the data to the union of flats. Because the
removed flat itself competes for reinsertion, the energy never increases.
"""

import warnings

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import as_point_array
from .scale import ScaleParams, local_best_fit_flat
from .utils import as_rng, as_seedseq, lower_median, parallel_map

__all__ = ["generate_candidates", "energy", "greedy_select", "lbf_cluster", "LBF"]

_CANDIDATES_PER_CLUSTER = 70
_PASSES_PER_CLUSTER = 5


def _median_energy(values):
    return lower_median(values)


_AGGREGATORS = {
    "l1_sum": lambda values: float(np.sum(values)),
    "median": _median_energy,
}


def _column_energies(cand_dists, other_min, kind):
    """Energy of each candidate column joined with the fixed remainder."""
    joined = np.minimum(other_min[:, None], cand_dists)
    if kind == "l1_sum":
        return joined.sum(axis=0)
    if kind == "median":
        n = joined.shape[0]
        k = (n - 1) // 2
        return np.partition(joined, k, axis=0)[k]
    raise ValueError(f"unknown energy kind {kind!r}")


def generate_candidates(X, dim, n_candidates, scale=None, seed=None, threads=1):
    """Fit candidate flats at uniformly chosen seed points.

    Each candidate is the best-fit ``dim``-flat of the automatically selected
    neighborhood of one seed point. Seed points are drawn without replacement;
    ``n_candidates`` greater than the number of points is capped with a
    warning.

    Returns
    -------
    flats : list of Flat
    seed_indices : ndarray
        Row index each candidate was grown from.
    """
    X = as_point_array(X)
    n = X.shape[0]
    if n_candidates < 1:
        raise ValueError(f"n_candidates must be >= 1, got {n_candidates}")
    if n_candidates > n:
        warnings.warn(
            f"n_candidates={n_candidates} exceeds the number of points {n}; capping",
            stacklevel=2,
        )
        n_candidates = n
    params = scale if scale is not None else ScaleParams(d=dim)
    rng = as_rng(seed)
    seed_indices = rng.choice(n, size=n_candidates, replace=False)
    flats = parallel_map(
        lambda i: local_best_fit_flat(X, int(i), params), seed_indices, threads
    )
    return flats, seed_indices


def energy(X, flats, kind="l1_sum"):
    """Aggregate distance of points to a union of flats.

    ``l1_sum`` sums each point's distance to its nearest flat; ``median``
    takes the lower median of those distances (robust to outliers).
    """
    if kind not in _AGGREGATORS:
        raise ValueError(f"unknown energy kind {kind!r}")
    X = as_point_array(X)
    if len(flats) == 0:
        raise ValueError("empty flat list")
    dists = np.min(np.stack([f.distance(X) for f in flats], axis=1), axis=1)
    return _AGGREGATORS[kind](dists)


def greedy_select(dist_matrix, n_clusters, n_passes, kind="l1_sum", seed=None):
    """Select ``n_clusters`` columns minimizing the aggregate row-minimum.

    Starts from a random column subset; each pass removes one currently held
    column at random and replaces it with the energy-minimizing column from
    the full pool (ties to the lowest index). The incumbent competes, so the
    energy trace is non-increasing.

    Parameters
    ----------
    dist_matrix : ndarray of shape (n_points, n_candidates)
        Distance of each point to each candidate flat.

    Returns
    -------
    selected : ndarray
        Chosen candidate indices, in slot order.
    trace : ndarray
        Energy after the initial draw and after each pass.
    """
    dist_matrix = np.asarray(dist_matrix, dtype=np.float64)
    n, n_cand = dist_matrix.shape
    if kind not in _AGGREGATORS:
        raise ValueError(f"unknown energy kind {kind!r}")
    if not 1 <= n_clusters <= n_cand:
        raise ValueError(f"need 1 <= n_clusters <= {n_cand}, got {n_clusters}")
    rng = as_rng(seed)
    selected = rng.choice(n_cand, size=n_clusters, replace=False)
    agg = _AGGREGATORS[kind]
    trace = [agg(dist_matrix[:, selected].min(axis=1))]
    for _ in range(n_passes):
        slot = int(rng.integers(n_clusters))
        rest = np.delete(selected, slot)
        if rest.size:
            other_min = dist_matrix[:, rest].min(axis=1)
        else:
            other_min = np.full(n, np.inf)
        energies = _column_energies(dist_matrix, other_min, kind)
        best = int(np.argmin(energies))
        selected[slot] = best
        new_energy = float(energies[best])
        # The incumbent competes, so the energy cannot rise beyond float
        # summation-order noise.
        assert new_energy <= trace[-1] * (1 + 1e-12) + 1e-12, (
            "energy increased during greedy exchange"
        )
        trace.append(new_energy)
    return selected, np.array(trace)


def lbf_cluster(
    X,
    n_clusters,
    dim,
    n_candidates=None,
    n_passes=None,
    scale=None,
    energy_kind="l1_sum",
    seed=None,
    threads=1,
):
    """Partition points among flats chosen by randomized energy minimization.

    Parameters
    ----------
    X : PointCloud or array-like of shape (N, D)
    n_clusters : int
    dim : int
        Dimension of the flats.
    n_candidates : int, optional
        Candidate pool size; defaults to ``70 * n_clusters``.
    n_passes : int, optional
        Exchange passes; defaults to ``5 * n_clusters``.
    scale : ScaleParams, optional
        Neighborhood-scan parameters; defaults to ``ScaleParams(d=dim)``.
    energy_kind : {"l1_sum", "median"}
    seed : int, optional
    threads : int, default 1
        Worker threads for candidate fitting (result is thread-count
        independent).

    Returns
    -------
    labels : ndarray of shape (N,)
    flats : list of Flat
        The selected flats; ``labels[i]`` indexes into it.
    info : dict
        Keys ``energy``, ``trace``, ``selected``, ``candidate_seeds``.
    """
    X = as_point_array(X)
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    if n_candidates is None:
        n_candidates = _CANDIDATES_PER_CLUSTER * n_clusters
    if n_passes is None:
        n_passes = _PASSES_PER_CLUSTER * n_clusters
    cand_seed, subset_seed = as_seedseq(seed).spawn(2)
    flats, seed_indices = generate_candidates(
        X, dim, n_candidates, scale=scale, seed=np.random.default_rng(cand_seed),
        threads=threads,
    )
    dist_matrix = np.stack([f.distance(X) for f in flats], axis=1)
    selected, trace = greedy_select(
        dist_matrix, n_clusters, n_passes, kind=energy_kind,
        seed=np.random.default_rng(subset_seed),
    )
    labels = np.argmin(dist_matrix[:, selected], axis=1)
    chosen = [flats[int(j)] for j in selected]
    info = {
        "energy": float(trace[-1]),
        "trace": trace,
        "selected": selected,
        "candidate_seeds": seed_indices,
    }
    return labels, chosen, info


class LBF(ClusterMixin, BaseEstimator):
    """Flat-clustering estimator using local best-fit candidate flats.

    Parameters
    ----------
    n_clusters : int, default 2
        Number of flats.
    dim : int, default 1
        Dimension of each flat.
    n_candidates : int, optional
        Candidate pool size, default ``70 * n_clusters``.
    n_passes : int, optional
        Exchange passes, default ``5 * n_clusters``.
    start_size : int, optional
        Smallest scanned neighborhood size, default ``2 * dim``.
    step_size : int, default 2
        Neighborhood scan increment.
    allow_first_scale : bool, default False
        Permit stopping at the smallest scanned neighborhood.
    max_neighbors : int, optional
        Cap on scanned neighborhood sizes.
    energy : {"l1_sum", "median"}, default "l1_sum"
        Aggregate distance minimized by the exchange passes; "median" is the
        outlier-robust choice.
    random_state : int, optional
    threads : int, default 1

    Attributes
    ----------
    labels_ : ndarray of shape (N,)
    flats_ : list of Flat
    energy_ : float
    energy_trace_ : ndarray
    """

    def __init__(
        self,
        n_clusters=2,
        dim=1,
        n_candidates=None,
        n_passes=None,
        start_size=None,
        step_size=2,
        allow_first_scale=False,
        max_neighbors=None,
        energy="l1_sum",
        random_state=None,
        threads=1,
    ):
        self.n_clusters = n_clusters
        self.dim = dim
        self.n_candidates = n_candidates
        self.n_passes = n_passes
        self.start_size = start_size
        self.step_size = step_size
        self.allow_first_scale = allow_first_scale
        self.max_neighbors = max_neighbors
        self.energy = energy
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
        labels, flats, info = lbf_cluster(
            X,
            self.n_clusters,
            self.dim,
            n_candidates=self.n_candidates,
            n_passes=self.n_passes,
            scale=self._scale_params(),
            energy_kind=self.energy,
            seed=self.random_state,
            threads=self.threads,
        )
        self.labels_ = labels
        self.flats_ = flats
        self.energy_ = info["energy"]
        self.energy_trace_ = info["trace"]
        return self

    def predict(self, X):
        check_is_fitted(self, "flats_")
        X = as_point_array(X)
        dists = np.stack([f.distance(X) for f in self.flats_], axis=1)
        return np.argmin(dists, axis=1)
