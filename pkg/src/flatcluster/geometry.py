"""Points, affine flats, best-fit flats, and dimension reduction.

A d-flat is a d-dimensional affine subspace of R^D, stored as an orthonormal
basis of its direction space plus an offset point. Linear subspaces are flats
with a zero offset.
"""

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .utils import check_points

__all__ = [
    "PointCloud",
    "Flat",
    "TubeMixture",
    "fit_flat",
    "dist_to_flat",
    "nearest_flat",
    "reduce_and_whiten",
    "ReduceWhiten",
    "min_principal_angle",
]

ORTHONORMAL_TOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """A finite set of points in R^D with optional ground-truth labels.

    Parameters
    ----------
    points : ndarray of shape (n, D)
        One point per row. Must be finite.
    truth_labels : ndarray of shape (n,), optional
        Integer cluster ids; -1 marks an outlier.
    """

    points: np.ndarray
    truth_labels: np.ndarray | None = None

    def __post_init__(self):
        pts = check_points(self.points)
        object.__setattr__(self, "points", _readonly(pts))
        if self.truth_labels is not None:
            labels = np.asarray(self.truth_labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise ValueError(
                    f"truth_labels shape {labels.shape} does not match "
                    f"{pts.shape[0]} points"
                )
            if labels.min(initial=0) < -1:
                raise ValueError("truth labels must be >= -1 (-1 marks outliers)")
            labels.setflags(write=False)
            object.__setattr__(self, "truth_labels", labels)

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.points.shape[1]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.points, dtype=dtype)


def as_point_array(X):
    """Accept a PointCloud or array-like; return the validated (n, D) array."""
    if isinstance(X, PointCloud):
        return X.points
    return check_points(X)


@dataclass(frozen=True)
class Flat:
    """A d-flat in R^D: ``{offset + basis.T @ t : t in R^d}``.

    ``basis`` has orthonormal rows spanning the direction space (may be empty
    for d = 0) and ``offset`` is any point on the flat. ``affine`` records
    whether the flat was fitted through the data centroid or the origin.
    """

    basis: np.ndarray
    offset: np.ndarray
    affine: bool = True

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=np.float64))
        offset = np.asarray(self.offset, dtype=np.float64).ravel()
        d, D = basis.shape
        if basis.size == 0:
            basis = basis.reshape(0, offset.shape[0])
            d, D = basis.shape
        if offset.shape[0] != D:
            raise ValueError(f"offset dimension {offset.shape[0]} != ambient {D}")
        if not 0 <= d < D:
            raise ValueError(f"flat dimension must satisfy 0 <= d < D, got d={d}, D={D}")
        gram = basis @ basis.T
        if d and np.max(np.abs(gram - np.eye(d))) > ORTHONORMAL_TOL:
            raise ValueError("basis rows are not orthonormal")
        object.__setattr__(self, "basis", _readonly(basis))
        object.__setattr__(self, "offset", _readonly(offset))

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def ambient_dim(self):
        return self.basis.shape[1]

    def project(self, X):
        """Orthogonal projection of points onto the flat."""
        X = np.asarray(X, dtype=np.float64)
        Y = X - self.offset
        return self.offset + (Y @ self.basis.T) @ self.basis

    def distance(self, X):
        """Euclidean distance from points to the flat (scalar for a 1-D input)."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        Y = np.atleast_2d(X) - self.offset
        resid = Y - (Y @ self.basis.T) @ self.basis
        dist = np.linalg.norm(resid, axis=1)
        return float(dist[0]) if single else dist


@dataclass(frozen=True)
class TubeMixture:
    """A union of tubes: the width-w neighborhoods of flats of a common dimension."""

    flats: tuple = field(default_factory=tuple)
    width: float = 0.0

    def __post_init__(self):
        flats = tuple(self.flats)
        if len(flats) < 1:
            raise ValueError("need at least one flat")
        d = flats[0].dim
        D = flats[0].ambient_dim
        for f in flats:
            if f.dim != d or f.ambient_dim != D:
                raise ValueError("all flats must share dimension and ambient dimension")
        if not self.width > 0:
            raise ValueError(f"tube width must be > 0, got {self.width}")
        object.__setattr__(self, "flats", flats)
        object.__setattr__(self, "width", float(self.width))

    @property
    def n_flats(self):
        return len(self.flats)

    @property
    def dim(self):
        return self.flats[0].dim

    @property
    def ambient_dim(self):
        return self.flats[0].ambient_dim


def _complete_rows(rows, d, D):
    """Pad an orthonormal row set to d rows with orthonormal complement vectors."""
    have = rows.shape[0]
    if have >= d:
        return rows[:d]
    # Orthonormal basis of the complement, via SVD of the projector kernel.
    if have:
        _, _, vt = np.linalg.svd(np.eye(D) - rows.T @ rows)
        extra = vt[: d - have]
    else:
        extra = np.eye(D)[:d]
    return np.vstack([rows, extra]) if have else extra


def fit_flat(points, d, affine=True):
    """Best-fit d-flat in the least-squares sense.

    Minimizes the sum of squared distances from the points to the flat. The
    direction basis consists of the top-d right singular vectors of the data
    matrix, centered at the centroid when ``affine`` and taken as-is (flat
    through the origin) otherwise.

    Parameters
    ----------
    points : array-like of shape (n, D)
    d : int
        Flat dimension, 0 <= d < D.
    affine : bool, default True
        Fit an affine flat; if False the flat passes through the origin.

    Returns
    -------
    Flat

    Notes
    -----
    When the points do not determine the flat (fewer than d+1 points, or rank
    deficient), any flat containing them is optimal; the basis is padded with
    arbitrary orthonormal complement directions and the residual is zero.
    """
    X = as_point_array(points)
    n, D = X.shape
    if not 0 <= d < D:
        raise ValueError(f"flat dimension must satisfy 0 <= d < D, got d={d}, D={D}")
    offset = X.mean(axis=0) if affine else np.zeros(D)
    Y = X - offset
    _, _, vt = np.linalg.svd(Y, full_matrices=False)
    basis = _complete_rows(vt, d, D)
    return Flat(basis=basis, offset=offset, affine=affine)


def dist_to_flat(x, flat):
    """Distance from a point (or each row of a matrix) to a flat."""
    return flat.distance(x)


def nearest_flat(x, flats):
    """Index and distance of the flat nearest to ``x``; ties give the lowest index."""
    if len(flats) == 0:
        raise ValueError("empty flat list")
    dists = np.array([f.distance(x) for f in flats])
    idx = int(np.argmin(dists))
    return idx, float(dists[idx])


def min_principal_angle(a, b):
    """Smallest principal angle (radians) between the direction spaces of two flats."""
    if a.dim == 0 or b.dim == 0:
        return np.pi / 2
    s = np.linalg.svd(a.basis @ b.basis.T, compute_uv=False)
    return float(np.arccos(np.clip(s.max(), -1.0, 1.0)))


class ReduceWhiten(TransformerMixin, BaseEstimator):
    """PCA-reduce to ``target_dim`` coordinates, then drop the ``drop_top`` leading ones.

    Dropping the dominant principal coordinates suppresses directions shared by
    all clusters (e.g. a common offset or global trend) before clustering.

    Parameters
    ----------
    target_dim : int
        Number of principal coordinates to keep before dropping.
    drop_top : int, default 0
        Number of leading principal coordinates to remove; the output has
        ``target_dim - drop_top`` columns.
    """

    def __init__(self, target_dim, drop_top=0):
        self.target_dim = target_dim
        self.drop_top = drop_top

    def fit(self, X, y=None):
        X = as_point_array(X)
        n, D = X.shape
        if self.target_dim > D:
            raise ValueError(f"target_dim {self.target_dim} exceeds ambient dimension {D}")
        if not 0 <= self.drop_top < self.target_dim:
            raise ValueError(
                f"drop_top must satisfy 0 <= drop_top < target_dim, "
                f"got drop_top={self.drop_top}, target_dim={self.target_dim}"
            )
        self.mean_ = X.mean(axis=0)
        _, _, vt = np.linalg.svd(X - self.mean_, full_matrices=False)
        components = _complete_rows(vt, self.target_dim, D)
        self.components_ = components[self.drop_top :]
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = as_point_array(X)
        return (X - self.mean_) @ self.components_.T


def reduce_and_whiten(X, target_dim, drop_top=0):
    """Apply :class:`ReduceWhiten` to a point cloud, carrying truth labels through."""
    pc = X if isinstance(X, PointCloud) else PointCloud(points=as_point_array(X))
    reduced = ReduceWhiten(target_dim, drop_top).fit_transform(pc.points)
    return PointCloud(points=reduced, truth_labels=pc.truth_labels)
