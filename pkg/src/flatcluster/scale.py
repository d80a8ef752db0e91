"""Automatic neighborhood-size selection for local flat fitting.

The local fit quality at a scale is measured by a dimensionless ratio: the
RMS distance of a neighborhood to its best-fit d-flat, divided by the
neighborhood radius. Scanning growing neighborhoods and stopping at the first
strict local minimum of this ratio picks out the largest neighborhood that is
still explained by a single flat.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import Flat, as_point_array, fit_flat
from .utils import parallel_map

__all__ = [
    "ScaleParams",
    "ScaleProfile",
    "beta2",
    "select_neighborhood",
    "local_best_fit_flat",
    "estimate_noise_epsilon",
]

_EIG_CHUNK = 64


@dataclass(frozen=True)
class ScaleParams:
    """Parameters of the neighborhood-size scan.

    Parameters
    ----------
    d : int
        Dimension of the flats being fitted locally.
    start_size : int, optional
        Smallest neighborhood size scanned; defaults to ``max(2 * d, d + 1)``.
    step_size : int, default 2
        Increment between consecutive scanned sizes.
    allow_first_scale : bool, default False
        Also stop at the second scanned size when the ratio rises immediately,
        returning the very first neighborhood. This admits data whose optimal
        scale is the smallest one (the "-MS" variants).
    max_neighbors : int, optional
        Cap on the scanned neighborhood size; defaults to all points.
    """

    d: int
    start_size: int | None = None
    step_size: int = 2
    allow_first_scale: bool = False
    max_neighbors: int | None = None

    def __post_init__(self):
        if self.d < 0:
            raise ValueError(f"d must be >= 0, got {self.d}")
        if self.start_size is not None and self.start_size < self.d + 1:
            raise ValueError(
                f"start_size must be >= d + 1 = {self.d + 1}, got {self.start_size}"
            )
        if self.step_size < 1:
            raise ValueError(f"step_size must be >= 1, got {self.step_size}")
        if self.max_neighbors is not None and self.max_neighbors < self.d + 1:
            raise ValueError("max_neighbors too small to fit a flat")

    @property
    def resolved_start(self):
        return self.start_size if self.start_size is not None else max(2 * self.d, self.d + 1)


@dataclass(frozen=True)
class ScaleProfile:
    """Record of one neighborhood scan: sizes tried, ratio values, chosen index."""

    sizes: np.ndarray
    values: np.ndarray
    chosen_k: int

    def __post_init__(self):
        object.__setattr__(self, "sizes", np.asarray(self.sizes, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if not 0 <= self.chosen_k < len(self.sizes):
            raise ValueError("chosen_k out of range")

    @property
    def chosen_size(self):
        return int(self.sizes[self.chosen_k])


def beta2(neighborhood, center, d):
    """Scale-free local flatness ratio of a neighborhood about a center point.

    RMS distance of the points to their best-fit affine d-flat, divided by the
    largest distance of a point from ``center``. Returns 0 when all points
    coincide with the center. The ratio is invariant to rescaling the
    neighborhood about the center.

    Parameters
    ----------
    neighborhood : array-like of shape (n, D)
    center : array-like of shape (D,)
        Reference point; need not be one of the rows.
    d : int
        Flat dimension, 0 <= d < D.
    """
    nb = as_point_array(neighborhood)
    center = np.asarray(center, dtype=np.float64).ravel()
    if center.shape[0] != nb.shape[1]:
        raise ValueError("center dimension does not match points")
    radius = float(np.max(np.linalg.norm(nb - center, axis=1)))
    if radius == 0.0:
        return 0.0
    flat = fit_flat(nb, d, affine=True)
    rms = float(np.sqrt(np.mean(flat.distance(nb) ** 2)))
    return rms / radius


def _stop_index(values, allow_first_scale, trust_from=0):
    """Index k at which the scan stops, or None to keep scanning.

    ``values`` is the profile scanned so far. Stops at the first k >= 2 with
    values[k-1] < min(values[k-2], values[k]) (strict; ties keep scanning),
    and additionally at k = 1 when values[0] < values[1] if allowed.

    A ratio of exactly 0 certifies a perfectly flat neighborhood and is a
    global minimum no later size can beat, so a zero followed by a rise also
    stops the scan (the strict rule alone would skip past it whenever the
    zero plateau has more than one entry, since exact zeros tie).

    ``trust_from`` is the first index whose neighborhood has more points than
    a d-flat can interpolate; smaller neighborhoods fit exactly no matter the
    data, so their vacuous near-zero ratios must not end the scan early.
    Only the value-is-a-minimum stops are gated; the strict rule's k >= 2
    comparison cannot fire on a spuriously tiny values[k-1] anyway.
    """
    k = len(values) - 1
    if k >= 1 and k - 1 >= trust_from and values[k - 1] == 0.0 and values[k] > 0.0:
        return k
    if k >= 2 and k - 1 >= trust_from and values[k - 1] < min(values[k - 2], values[k]):
        return k
    if allow_first_scale and k == 1 and trust_from == 0 and values[0] < values[1]:
        return k
    return None


def select_neighborhood(X, x_index, params):
    """Find the best-fit neighborhood of one point by scanning growing sizes.

    Sizes ``S, S+T, S+2T, ...`` are scanned (S = start, T = step); at each, the
    flatness ratio :func:`beta2` of the nearest points is evaluated. The scan
    stops at the first strict local minimum of the ratio and returns that
    neighborhood; an exhausted scan returns the largest one scanned.

    Parameters
    ----------
    X : PointCloud or array-like of shape (N, D)
    x_index : int
        Row index of the query point; the point itself belongs to its
        neighborhood.
    params : ScaleParams

    Returns
    -------
    indices : ndarray
        Row indices of the chosen neighborhood, nearest first (distance ties
        broken by index).
    profile : ScaleProfile
    """
    X = as_point_array(X)
    N, D = X.shape
    if not 0 <= x_index < N:
        raise IndexError(f"x_index {x_index} out of range for {N} points")
    if not 0 <= params.d < D:
        raise ValueError(f"flat dimension must satisfy 0 <= d < D, got d={params.d}, D={D}")
    start = params.resolved_start
    limit = N if params.max_neighbors is None else min(params.max_neighbors, N)
    if N <= start:
        raise ValueError(f"need more than start_size={start} points, got {N}")
    limit = max(limit, start)

    diffs = X - X[x_index]
    sqdist = np.einsum("ij,ij->i", diffs, diffs)
    order = np.argsort(sqdist, kind="stable")
    Y = diffs[order[:limit]]
    radii = np.sqrt(sqdist[order[:limit]])

    sizes = np.arange(start, limit + 1, params.step_size)
    values = []
    # First scanned size with more points than an affine d-flat interpolates.
    trust_from = int(np.searchsorted(sizes, params.d + 2))
    n_small = D - params.d
    scatter = np.zeros((D, D))
    total = np.zeros(D)
    prev = 0
    stop = None
    for lo in range(0, len(sizes), _EIG_CHUNK):
        chunk = sizes[lo : lo + _EIG_CHUNK]
        mats = np.empty((len(chunk), D, D))
        for ci, m in enumerate(chunk):
            block = Y[prev:m]
            scatter += block.T @ block
            total += block.sum(axis=0)
            prev = m
            mean = total / m
            mats[ci] = scatter - m * np.outer(mean, mean)
        eigs = np.linalg.eigvalsh(mats)
        # On exactly-flat data the residual eigenvalue sum is a roundoff-scale
        # number of either sign. Folding it with abs (rather than clipping to
        # exactly 0) keeps degenerate profiles jittery the way an SVD-based
        # evaluation is, so the strict stopping rule still finds early minima
        # instead of scanning through a plateau of manufactured exact ties.
        resid2 = np.abs(eigs[:, :n_small].sum(axis=1))
        rms = np.sqrt(resid2 / chunk)
        rad = radii[chunk - 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(rad > 0, rms / np.where(rad > 0, rad, 1.0), 0.0)
        for v in vals:
            values.append(float(v))
            stop = _stop_index(values, params.allow_first_scale, trust_from)
            if stop is not None:
                break
        if stop is not None:
            break

    chosen = stop - 1 if stop is not None else len(values) - 1
    profile = ScaleProfile(
        sizes=sizes[: len(values)], values=np.array(values), chosen_k=chosen
    )
    return order[: profile.chosen_size].copy(), profile


def _local_fit(X, x_index, params):
    """Chosen neighborhood, its best-fit flat, RMS residual, and scan profile."""
    X = as_point_array(X)
    indices, profile = select_neighborhood(X, x_index, params)
    flat = fit_flat(X[indices], params.d, affine=True)
    rms = float(np.sqrt(np.mean(flat.distance(X[indices]) ** 2)))
    return indices, flat, rms, profile


def local_best_fit_flat(X, x_index, params):
    """Best-fit flat of the automatically chosen neighborhood of one point."""
    _, flat, _, _ = _local_fit(X, x_index, params)
    return flat


def estimate_noise_epsilon(X, params, threads=1):
    """Estimate the inlier noise level of a point set.

    For every point, the RMS distance of its chosen neighborhood to the local
    best-fit flat is recorded; the estimate is the average of these values
    over all points.
    """
    X = as_point_array(X)
    rms_values = parallel_map(
        lambda i: _local_fit(X, i, params)[2], range(X.shape[0]), threads
    )
    return float(np.mean(rms_values))
