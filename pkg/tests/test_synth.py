"""Synthetic data generation and the tube-union sampler."""

import numpy as np
import pytest

from flatcluster import (
    Flat,
    SynthSpec,
    generate_hybrid,
    min_principal_angle,
    sample_tube_mixture,
    sample_uniform_ball,
    tube_mixture_from_flats,
)


def test_counts_and_labels():
    spec = SynthSpec(ambient_dim=4, flat_dims=(2, 2), points_per_flat=250,
                     outlier_fraction=0.3)
    cloud, flats = generate_hybrid(spec, seed=0)
    assert len(flats) == 2
    n_in = 500
    n_out = round(0.3 / 0.7 * n_in)  # 214, so outliers are 30% of the total
    assert cloud.n_points == n_in + n_out
    assert np.sum(cloud.truth_labels == -1) == n_out
    assert np.sum(cloud.truth_labels == 0) == 250
    assert np.sum(cloud.truth_labels == 1) == 250
    frac = n_out / (n_in + n_out)
    assert frac == pytest.approx(0.3, abs=1e-3)


def test_noiseless_points_lie_on_their_flat():
    spec = SynthSpec(ambient_dim=5, flat_dims=(1, 2, 3), points_per_flat=40,
                     noise_sigma=0.0, affine=True)
    cloud, flats = generate_hybrid(spec, seed=1)
    for k, flat in enumerate(flats):
        block = cloud.points[cloud.truth_labels == k]
        assert np.max(flat.distance(block)) < 1e-10
        # Uniform in the unit ball of the flat: never farther than 1 from offset.
        assert np.max(np.linalg.norm(block - flat.offset, axis=1)) <= 1 + 1e-10


def test_noise_magnitude():
    sigma = 0.05
    spec = SynthSpec(ambient_dim=6, flat_dims=(2,), points_per_flat=4000,
                     noise_sigma=sigma)
    cloud, flats = generate_hybrid(spec, seed=2)
    d2 = flats[0].distance(cloud.points) ** 2
    # Distance to the flat picks up the D - d orthogonal noise coordinates.
    expected = sigma**2 * (6 - 2)
    assert np.mean(d2) == pytest.approx(expected, rel=0.2)


def test_min_angle_enforced():
    bound = np.pi / 8
    for seed in range(20):
        spec = SynthSpec(ambient_dim=5, flat_dims=(2, 2, 2, 2),
                         points_per_flat=1, min_angle=bound)
        _, flats = generate_hybrid(spec, seed=seed)
        for i in range(len(flats)):
            for j in range(i + 1, len(flats)):
                ang = min_principal_angle(flats[i], flats[j])
                assert ang >= bound - 1e-12


def test_uniform_ball_statistics():
    rng = np.random.default_rng(3)
    for d in (1, 2, 3):
        pts = sample_uniform_ball(rng, 20000, d)
        r = np.linalg.norm(pts, axis=1)
        assert r.max() <= 1.0
        mean, se = r.mean(), r.std() / np.sqrt(r.size)
        assert abs(mean - d / (d + 1)) < 4 * se + 1e-3


def test_uniform_ball_zero_dim():
    pts = sample_uniform_ball(np.random.default_rng(0), 7, 0)
    assert pts.shape == (7, 0)


def test_outliers_inside_matched_cube():
    spec = SynthSpec(ambient_dim=3, flat_dims=(1, 1), points_per_flat=200,
                     noise_sigma=0.02, outlier_fraction=0.25)
    cloud, _ = generate_hybrid(spec, seed=4)
    inliers = cloud.points[cloud.truth_labels >= 0]
    outliers = cloud.points[cloud.truth_labels == -1]
    half_side = np.max(np.linalg.norm(inliers, axis=1))
    assert np.max(np.abs(outliers)) <= half_side


def two_line_mixture(width=0.02):
    e1 = Flat(basis=np.array([[1.0, 0.0]]), offset=np.zeros(2))
    e2 = Flat(basis=np.array([[0.0, 1.0]]), offset=np.zeros(2))
    return tube_mixture_from_flats([e1, e2], width)


def test_tube_sampler_inside_ball_and_tubes():
    mix = two_line_mixture()
    center = np.array([2.0, 0.0])
    pts, labels = sample_tube_mixture(mix, 3000, center, 1.5, seed=5)
    assert pts.shape == (3000, 2)
    assert np.max(np.linalg.norm(pts - center, axis=1)) <= 1.5 + 1e-12
    for i, flat in enumerate(mix.flats):
        rows = labels == i
        if rows.any():
            assert np.max(flat.distance(pts[rows])) <= mix.width + 1e-12


def test_tube_sampler_deterministic():
    mix = two_line_mixture()
    a, la = sample_tube_mixture(mix, 500, np.zeros(2), 1.0, seed=6)
    b, lb = sample_tube_mixture(mix, 500, np.zeros(2), 1.0, seed=6)
    assert np.array_equal(a, b)
    assert np.array_equal(la, lb)


def test_tube_sampler_balance_at_symmetric_center():
    # Ball centered at the origin sees both perpendicular lines identically,
    # so the tube mass (hence the sample split) must be even.
    mix = two_line_mixture(width=0.05)
    n = 4000
    _, labels = sample_tube_mixture(mix, n, np.zeros(2), 1.0, seed=7)
    n0 = int(np.sum(labels == 0))
    assert abs(n0 - n / 2) <= 5 * np.sqrt(n / 4)


def test_tube_sampler_offset_mean_distance():
    # Ball at (2, 0) with radius 1 touches only the x-axis tube; the
    # orthogonal coordinate is uniform on [-w, w], so E|y| = w / 2.
    w = 0.02
    mix = two_line_mixture(width=w)
    pts, labels = sample_tube_mixture(mix, 20000, np.array([2.0, 0.0]), 1.0, seed=8)
    assert set(np.unique(labels)) == {0}
    y = np.abs(pts[:, 1])
    se = y.std() / np.sqrt(y.size)
    assert abs(y.mean() - w / 2) < 4 * se


def test_tube_sampler_validation():
    mix = two_line_mixture()
    with pytest.raises(ValueError, match="misses"):
        sample_tube_mixture(mix, 10, np.array([50.0, 50.0]), 1.0, seed=0)
    with pytest.raises(ValueError):
        sample_tube_mixture(mix, 0, np.zeros(2), 1.0, seed=0)
    with pytest.raises(ValueError):
        sample_tube_mixture(mix, 10, np.zeros(2), -1.0, seed=0)
    with pytest.raises(ValueError):
        sample_tube_mixture(mix, 10, np.zeros(3), 1.0, seed=0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(ambient_dim=3, flat_dims=())
    with pytest.raises(ValueError):
        SynthSpec(ambient_dim=3, flat_dims=(3,))
    with pytest.raises(ValueError):
        SynthSpec(ambient_dim=3, flat_dims=(1,), points_per_flat=0)
    with pytest.raises(ValueError):
        SynthSpec(ambient_dim=3, flat_dims=(1,), noise_sigma=-0.1)
    with pytest.raises(ValueError):
        SynthSpec(ambient_dim=3, flat_dims=(1,), outlier_fraction=1.0)
