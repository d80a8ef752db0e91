"""Synthetic hybrid-linear data and uniform samples from unions of tubes.

The benchmark protocol: K random flats, a fixed number of points per flat
drawn uniformly from a unit ball inside each flat, isotropic Gaussian ambient
noise, and optionally uniform outliers from a cube matched to the inlier
spread.
"""

from dataclasses import dataclass

import numpy as np

from .geometry import Flat, PointCloud, TubeMixture, min_principal_angle
from .utils import as_rng

__all__ = [
    "SynthSpec",
    "sample_uniform_ball",
    "random_flats",
    "generate_hybrid",
    "sample_tube_mixture",
]

_ANGLE_ATTEMPTS = 1000


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic hybrid-linear data set.

    Parameters
    ----------
    ambient_dim : int
    flat_dims : tuple of int
        Dimension of each flat; the length sets the number of clusters.
    points_per_flat : int, default 250
    noise_sigma : float, default 0.05
        Std of the isotropic ambient Gaussian noise.
    outlier_fraction : float, default 0.0
        Fraction of the final point set that is outliers, in [0, 1).
    affine : bool, default False
        Translate each flat by a random offset in the unit ball; flats pass
        through the origin otherwise.
    min_angle : float, optional
        Lower bound (radians) on the smallest principal angle between every
        pair of flats, enforced by rejection sampling.
    """

    ambient_dim: int
    flat_dims: tuple
    points_per_flat: int = 250
    noise_sigma: float = 0.05
    outlier_fraction: float = 0.0
    affine: bool = False
    min_angle: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "flat_dims", tuple(int(d) for d in self.flat_dims))
        if len(self.flat_dims) < 1:
            raise ValueError("need at least one flat")
        for d in self.flat_dims:
            if not 0 < d < self.ambient_dim:
                raise ValueError(
                    f"flat dims must satisfy 0 < d < {self.ambient_dim}, got {d}"
                )
        if self.points_per_flat < 1:
            raise ValueError("points_per_flat must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.outlier_fraction < 1:
            raise ValueError("outlier_fraction must be in [0, 1)")

    @property
    def n_flats(self):
        return len(self.flat_dims)


def sample_uniform_ball(rng, n, d):
    """Uniform samples from the unit d-ball (mean radius d / (d + 1))."""
    if d == 0:
        return np.zeros((n, 0))
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.random(n) ** (1.0 / d)
    return direction * radius[:, None]


def _orthonormal_rows(rng, d, D):
    g = rng.standard_normal((d, D))
    _, _, vt = np.linalg.svd(g, full_matrices=False)
    return vt


def random_flats(spec, rng):
    """Random flats per the spec, rejection-sampled to honor ``min_angle``."""
    for _ in range(_ANGLE_ATTEMPTS):
        flats = []
        for d in spec.flat_dims:
            basis = _orthonormal_rows(rng, d, spec.ambient_dim)
            if spec.affine:
                offset = sample_uniform_ball(rng, 1, spec.ambient_dim)[0]
            else:
                offset = np.zeros(spec.ambient_dim)
            flats.append(Flat(basis=basis, offset=offset, affine=spec.affine))
        if spec.min_angle is None:
            return flats
        ok = all(
            min_principal_angle(flats[i], flats[j]) >= spec.min_angle
            for i in range(len(flats))
            for j in range(i + 1, len(flats))
        )
        if ok:
            return flats
    raise RuntimeError(
        f"could not satisfy min_angle={spec.min_angle} in {_ANGLE_ATTEMPTS} attempts"
    )


def generate_hybrid(spec, seed=None):
    """Sample a hybrid-linear data set.

    Per flat, ``points_per_flat`` points are drawn uniformly from the unit
    ball inside the flat (about its offset) and corrupted by ambient Gaussian
    noise. Outliers are drawn uniformly from the origin-centered cube whose
    half-side is the largest inlier norm and appended with truth label -1.

    Returns
    -------
    PointCloud
        With ``truth_labels`` set (flat index, or -1 for outliers).
    data_flats : list of Flat
        The generating flats.
    """
    rng = as_rng(seed)
    flats = random_flats(spec, rng)
    blocks, labels = [], []
    for k, flat in enumerate(flats):
        coords = sample_uniform_ball(rng, spec.points_per_flat, flat.dim)
        points = flat.offset + coords @ flat.basis
        points = points + spec.noise_sigma * rng.standard_normal(points.shape)
        blocks.append(points)
        labels.append(np.full(spec.points_per_flat, k))
    inliers = np.vstack(blocks)
    if spec.outlier_fraction > 0:
        n_in = inliers.shape[0]
        n_out = int(round(spec.outlier_fraction / (1 - spec.outlier_fraction) * n_in))
        half_side = float(np.max(np.linalg.norm(inliers, axis=1)))
        outliers = rng.uniform(-half_side, half_side, size=(n_out, spec.ambient_dim))
        points = np.vstack([inliers, outliers])
        truth = np.concatenate(labels + [np.full(n_out, -1)])
    else:
        points = inliers
        truth = np.concatenate(labels)
    return PointCloud(points=points, truth_labels=truth), flats


def _tube_frames(mixture):
    """Per tube: orthonormal basis of the directions orthogonal to the flat."""
    frames = []
    for flat in mixture.flats:
        if flat.dim:
            _, _, vt = np.linalg.svd(np.eye(flat.ambient_dim) - flat.basis.T @ flat.basis)
            frames.append(vt[: flat.ambient_dim - flat.dim])
        else:
            frames.append(np.eye(flat.ambient_dim))
    return frames


def sample_tube_mixture(mixture, n, center, radius, seed=None, max_batches=1000):
    """Uniform samples from a union of tubes restricted to a ball.

    The sampling measure is the sum of the tubes' volume measures (a point
    covered by several tubes carries proportionally more mass). Tubes that
    miss the ball entirely are excluded; if all do, a ValueError is raised.

    Returns
    -------
    points : ndarray of shape (n, D)
    tube_labels : ndarray of shape (n,)
        Index of the tube each sample was drawn from.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    center = np.asarray(center, dtype=np.float64).ravel()
    D = mixture.ambient_dim
    if center.shape[0] != D:
        raise ValueError("center dimension mismatch")
    w = mixture.width
    rng = as_rng(seed)

    active = [
        i for i, f in enumerate(mixture.flats) if f.distance(center) - w <= radius
    ]
    if not active:
        raise ValueError("the ball misses every tube")
    frames = _tube_frames(mixture)
    # Flat-space coordinates of the ball center's projection, per active tube.
    centers_flat = [
        mixture.flats[i].basis @ (center - mixture.flats[i].offset) for i in active
    ]

    d = mixture.dim
    c = D - d
    points = np.empty((n, D))
    tube_labels = np.empty(n, dtype=np.int64)
    got = 0
    for _ in range(max_batches):
        batch = max(2 * (n - got), 512)
        pick = rng.integers(len(active), size=batch)
        u = sample_uniform_ball(rng, batch, d) * radius
        v = sample_uniform_ball(rng, batch, c) * w
        proposals = np.empty((batch, D))
        for ai, i in enumerate(active):
            rows = pick == ai
            if not rows.any():
                continue
            flat = mixture.flats[i]
            proposals[rows] = (
                flat.offset
                + (centers_flat[ai] + u[rows]) @ flat.basis
                + v[rows] @ frames[i]
            )
        inside = np.linalg.norm(proposals - center, axis=1) <= radius
        take = min(int(inside.sum()), n - got)
        if take:
            idx = np.flatnonzero(inside)[:take]
            points[got : got + take] = proposals[idx]
            tube_labels[got : got + take] = np.array(active)[pick[idx]]
            got += take
        if got == n:
            return points, tube_labels
    raise RuntimeError(
        "tube/ball intersection too thin: acceptance rate ~0 "
        f"after {max_batches} batches"
    )


def tube_mixture_from_flats(flats, width):
    """Convenience constructor kept next to the sampler."""
    return TubeMixture(flats=tuple(flats), width=width)
