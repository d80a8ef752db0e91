"""Alternating K-flats refinement and farthest-insertion initialization."""

import numpy as np
import pytest

from flatcluster import (
    KFlats,
    ScaleParams,
    SynthSpec,
    farthest_insertion_init,
    generate_hybrid,
    kflats,
    misclassification_rate,
)


def crossing_lines(seed=0, n_per=100, noise=0.01):
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, n_per)
    a = np.c_[t, np.zeros(n_per)]
    s = rng.uniform(-1, 1, n_per)
    b = np.c_[np.zeros(n_per), s]
    X = np.vstack([a, b]) + noise * rng.standard_normal((2 * n_per, 2))
    return X, np.repeat([0, 1], n_per)


def separated_planes(seed=0, n_per=150):
    spec = SynthSpec(ambient_dim=4, flat_dims=(2, 2), points_per_flat=n_per,
                     noise_sigma=0.02, affine=True)
    cloud, _ = generate_hybrid(spec, seed=seed)
    return cloud


def test_objective_trace_non_increasing():
    for seed in range(30):
        cloud = separated_planes(seed=seed, n_per=60)
        _, _, trace = kflats(cloud.points, 2, 2, seed=seed)
        assert np.all(np.diff(trace) <= trace[:-1] * 1e-9 + 1e-12)


def test_recovers_separated_planes():
    hits = 0
    for seed in range(10):
        cloud = separated_planes(seed=200 + seed)
        labels, flats, trace = kflats(cloud.points, 2, 2, seed=seed)
        assert len(flats) == 2
        if misclassification_rate(labels, cloud.truth_labels) < 5.0:
            hits += 1
    assert hits >= 8


def test_farthest_insertion_covers_both_lines():
    X, truth = crossing_lines(seed=1)
    for seed in range(5):
        flats = farthest_insertion_init(X, 2, 1, seed=seed)
        # Each planted line should be well explained by one of the init flats.
        for side in (0, 1):
            block = X[truth == side]
            best = min(np.median(f.distance(block)) for f in flats)
            assert best < 0.05


def test_farthest_insertion_fixed_neighborhood():
    X, _ = crossing_lines(seed=2)
    flats = farthest_insertion_init(X, 2, 1, init="farthest_fixed",
                                    neighborhood_size=10, seed=0)
    assert len(flats) == 2
    with pytest.raises(ValueError):
        farthest_insertion_init(X, 2, 1, init="farthest_fixed", seed=0)
    with pytest.raises(ValueError):
        farthest_insertion_init(X, 2, 1, init="random", seed=0)


def test_linear_mode_keeps_origin():
    X, _ = crossing_lines(seed=3)
    _, flats, _ = kflats(X, 2, 1, affine=False, seed=0)
    for f in flats:
        assert np.allclose(f.offset, 0.0)


def test_validation():
    X = np.zeros((3, 2))
    with pytest.raises(ValueError):
        kflats(X, 5, 1, seed=0)
    with pytest.raises(ValueError):
        kflats(X, 2, 1, init="bogus", seed=0)


def test_random_init_valid_output():
    cloud = separated_planes(seed=5, n_per=50)
    labels, flats, trace = kflats(cloud.points, 3, 2, init="random", seed=7)
    assert labels.shape == (cloud.n_points,)
    assert set(np.unique(labels)) <= {0, 1, 2}
    assert len(flats) == 3
    assert np.isfinite(trace).all()


def test_deterministic():
    cloud = separated_planes(seed=6, n_per=60)
    a = kflats(cloud.points, 2, 2, seed=4)[0]
    b = kflats(cloud.points, 2, 2, seed=4)[0]
    assert np.array_equal(a, b)


def test_estimator_restarts_and_predict():
    cloud = separated_planes(seed=7, n_per=80)
    est = KFlats(n_clusters=2, dim=2, n_restarts=3, random_state=1).fit(cloud.points)
    assert est.labels_.shape == (cloud.n_points,)
    assert est.objective_ == est.objective_trace_[-1]
    assert np.array_equal(est.predict(cloud.points), est.labels_)
    single = KFlats(n_clusters=2, dim=2, n_restarts=1, random_state=1).fit(cloud.points)
    assert single.objective_ >= est.objective_ - 1e-12
