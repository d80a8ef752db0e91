"""Flatness ratios and automatic neighborhood-size selection."""

import numpy as np
import pytest

from flatcluster import (
    ScaleParams,
    ScaleProfile,
    beta2,
    estimate_noise_epsilon,
    local_best_fit_flat,
    select_neighborhood,
)
from flatcluster.scale import _stop_index

from test_geometry import random_rotation


def two_planes_cloud(seed=0, n_per=120, gap=4.0):
    """Two parallel, well separated planes in R^3 with mild noise."""
    rng = np.random.default_rng(seed)
    a = np.c_[rng.uniform(-1, 1, (n_per, 2)), np.zeros(n_per)]
    b = np.c_[rng.uniform(-1, 1, (n_per, 2)), np.full(n_per, gap)]
    X = np.vstack([a, b]) + 0.01 * rng.standard_normal((2 * n_per, 3))
    labels = np.repeat([0, 1], n_per)
    return X, labels


def test_beta2_cross_hand_value():
    pts = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    # RMS residual to any best-fit line through the centroid is sqrt(2/4);
    # the farthest point sits at distance 1.
    assert np.isclose(beta2(pts, np.zeros(2), 1), 1.0 / np.sqrt(2), atol=1e-12)


def test_beta2_collinear_is_zero():
    pts = np.outer(np.arange(1.0, 6.0), np.array([1.0, 2.0, -1.0]))
    assert beta2(pts, pts[0], 1) < 1e-14


def test_beta2_scale_invariance():
    rng = np.random.default_rng(7)
    for _ in range(30):
        nb = rng.standard_normal((15, 4))
        center = rng.standard_normal(4)
        base = beta2(nb, center, 2)
        for c in (1e-6, 1e-3, 1e3, 1e6):
            scaled = beta2(center + c * (nb - center), center, 2)
            assert abs(scaled - base) <= 1e-10


def test_beta2_zero_radius():
    pts = np.zeros((5, 3))
    assert beta2(pts, np.zeros(3), 1) == 0.0


def test_beta2_center_dim_mismatch():
    with pytest.raises(ValueError):
        beta2(np.zeros((4, 3)), np.zeros(2), 1)


def test_stop_rule_interior_minimum():
    assert _stop_index([0.5, 0.3], False) is None
    assert _stop_index([0.5, 0.3, 0.4], False) == 2
    # Ties keep scanning (strict inequality).
    assert _stop_index([0.5, 0.3, 0.3], False) is None
    assert _stop_index([0.3, 0.3, 0.4], False) is None


def test_stop_rule_first_scale_switch():
    assert _stop_index([0.3, 0.5], True) == 1
    assert _stop_index([0.3, 0.5], False) is None
    assert _stop_index([0.5, 0.5], True) is None


def test_stop_rule_zero_plateau_rise():
    # An exact zero is a global minimum of the nonnegative ratio, so the scan
    # ends where a zero run is followed by a rise; an unbroken run ties on.
    assert _stop_index([0.0, 0.0, 0.5], False) == 2
    assert _stop_index([0.0, 0.5], False) == 1
    assert _stop_index([0.0, 0.0, 0.0], False) is None


def test_stop_rule_interpolation_sizes_distrusted():
    # Neighborhoods a d-flat interpolates exactly produce vacuous zeros;
    # indices before trust_from cannot end the scan.
    assert _stop_index([0.0, 0.5], False, trust_from=1) is None
    assert _stop_index([0.0, 0.3, 0.2, 0.4], False, trust_from=1) == 3
    assert _stop_index([1e-12, 0.5], True, trust_from=1) is None
    assert _stop_index([1e-12, 0.5], True, trust_from=0) == 1


def test_select_neighborhood_stops_before_contamination():
    # Two exactly flat parallel planes: the profile is identically zero while
    # the neighborhood stays on the host plane and jumps when the other plane
    # enters, so the chosen neighborhood is the largest label-pure one.
    rng = np.random.default_rng(5)
    blocks = [np.c_[rng.uniform(0, 1, (300, 2)), np.full(300, z)]
              for z in (0.0, 0.2)]
    X = np.vstack(blocks)
    truth = np.repeat([0, 1], 300)
    params = ScaleParams(d=2)
    for idx in (0, 57, 301, 500):
        indices, profile = select_neighborhood(X, idx, params)
        assert np.all(truth[indices] == truth[idx])
        assert profile.values[profile.chosen_k] == 0.0
        # Well past the start size 4: the scan crossed the zero plateau.
        assert profile.chosen_size >= 10


def test_select_neighborhood_purity_on_separated_planes():
    X, labels = two_planes_cloud()
    params = ScaleParams(d=2)
    for idx in range(0, 240, 17):
        indices, profile = select_neighborhood(X, idx, params)
        assert indices[0] == idx  # query is its own nearest point
        assert np.all(labels[indices] == labels[idx])
        assert isinstance(profile, ScaleProfile)
        assert profile.chosen_size == len(indices)


def test_select_neighborhood_rigid_motion_invariance():
    X, _ = two_planes_cloud(seed=3)
    rng = np.random.default_rng(8)
    rot = random_rotation(rng, 3)
    moved = X @ rot.T + np.array([5.0, -2.0, 1.0])
    params = ScaleParams(d=2)
    for idx in (0, 50, 130, 201):
        ind_a, prof_a = select_neighborhood(X, idx, params)
        ind_b, prof_b = select_neighborhood(moved, idx, params)
        assert np.array_equal(ind_a, ind_b)
        assert np.allclose(prof_a.values, prof_b.values, atol=1e-9)


def test_select_neighborhood_matches_public_beta2():
    # The incremental scan must agree with the direct SVD-based ratio.
    rng = np.random.default_rng(12)
    X = rng.standard_normal((60, 4))
    params = ScaleParams(d=2, max_neighbors=40)
    indices, profile = select_neighborhood(X, 5, params)
    diffs = X - X[5]
    order = np.argsort(np.einsum("ij,ij->i", diffs, diffs), kind="stable")
    for size, value in zip(profile.sizes, profile.values):
        direct = beta2(X[order[:size]], X[5], 2)
        assert abs(direct - value) <= 1e-9


def test_select_neighborhood_exhausted_returns_largest():
    # Points exactly on a line: the ratio is identically zero, there is no
    # strict local minimum, and the scan runs to its cap.
    t = np.linspace(0.0, 1.0, 30)
    X = np.c_[t, 2 * t]
    params = ScaleParams(d=1, max_neighbors=20)
    indices, profile = select_neighborhood(X, 0, params)
    assert profile.chosen_size == profile.sizes[-1]
    assert len(indices) == profile.sizes[-1]
    assert np.allclose(profile.values, 0.0)


def test_select_neighborhood_errors():
    X = np.random.default_rng(0).standard_normal((10, 3))
    with pytest.raises(IndexError):
        select_neighborhood(X, 10, ScaleParams(d=1))
    with pytest.raises(ValueError):
        select_neighborhood(X, 0, ScaleParams(d=3))
    with pytest.raises(ValueError):
        select_neighborhood(X[:3], 0, ScaleParams(d=1, start_size=3))


def test_scale_params_validation():
    with pytest.raises(ValueError):
        ScaleParams(d=2, start_size=2)
    with pytest.raises(ValueError):
        ScaleParams(d=1, step_size=0)
    with pytest.raises(ValueError):
        ScaleParams(d=2, max_neighbors=2)
    assert ScaleParams(d=2).resolved_start == 4
    assert ScaleParams(d=1).resolved_start == 2


def test_duplication_with_doubled_scan_matches():
    # Duplicating every point while doubling start and step visits the same
    # geometric neighborhoods, so the profiles coincide exactly.
    X, _ = two_planes_cloud(seed=5, n_per=60)
    dup = np.repeat(X, 2, axis=0)
    base = ScaleParams(d=2, start_size=6, step_size=2)
    doubled = ScaleParams(d=2, start_size=12, step_size=4)
    for idx in (0, 33, 90):
        _, prof_a = select_neighborhood(X, idx, base)
        _, prof_b = select_neighborhood(dup, 2 * idx, doubled)
        m = min(len(prof_a.values), len(prof_b.values))
        assert np.allclose(prof_a.values[:m], prof_b.values[:m], atol=1e-9)
        assert prof_b.chosen_size == 2 * prof_a.chosen_size


def test_local_best_fit_flat_tracks_plane():
    X, labels = two_planes_cloud(seed=9)
    params = ScaleParams(d=2)
    flat = local_best_fit_flat(X, 10, params)
    indices, _ = select_neighborhood(X, 10, params)
    # The fit explains its own neighborhood at the noise scale and does not
    # tilt far out of the plane.
    assert np.sqrt(np.mean(flat.distance(X[indices]) ** 2)) < 0.03
    normal_overlap = np.abs(flat.basis @ np.array([0.0, 0.0, 1.0]))
    assert normal_overlap.max() < 0.5


def test_estimate_noise_epsilon_noiseless():
    rng = np.random.default_rng(21)
    X = np.c_[rng.uniform(-1, 1, (200, 2)), np.zeros(200)]
    eps = estimate_noise_epsilon(X, ScaleParams(d=2))
    assert eps < 1e-8


def test_estimate_noise_epsilon_matches_sigma():
    rng = np.random.default_rng(22)
    sigma = 0.05
    X = np.c_[rng.uniform(-1, 1, (300, 2)), np.zeros(300)]
    X = X + sigma * rng.standard_normal(X.shape)
    eps = estimate_noise_epsilon(X, ScaleParams(d=2))
    assert 0.5 * sigma <= eps <= 3.0 * sigma


def test_estimate_noise_epsilon_thread_invariant():
    X, _ = two_planes_cloud(seed=30, n_per=40)
    a = estimate_noise_epsilon(X, ScaleParams(d=2), threads=1)
    b = estimate_noise_epsilon(X, ScaleParams(d=2), threads=3)
    assert a == b
