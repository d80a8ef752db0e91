"""Label matching and the misclassification metric.

Predicted cluster ids are arbitrary, so error rates are measured under the
best one-to-one relabeling. Points whose ground-truth label is -1 (outliers)
are excluded from the count.
"""

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["match_labels", "misclassification_rate"]

_BRUTE_FORCE_MAX = 8


def _confusion(pred, truth):
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValueError(f"label length mismatch: {pred.shape} vs {truth.shape}")
    inlier = truth >= 0
    n_inliers = int(inlier.sum())
    if n_inliers == 0:
        raise ValueError("ground truth contains no inliers")
    p, t = pred[inlier], truth[inlier]
    if p.min() < 0:
        raise ValueError("predicted labels must be >= 0")
    k = int(max(p.max(), t.max())) + 1
    m = np.zeros((k, k), dtype=np.int64)
    np.add.at(m, (p, t), 1)
    return m, n_inliers


def _match_brute(m):
    k = m.shape[0]
    best_perm, best_count = None, -1
    for perm in itertools.permutations(range(k)):
        count = sum(m[i, perm[i]] for i in range(k))
        if count > best_count:
            best_perm, best_count = perm, count
    return np.array(best_perm, dtype=np.int64), int(best_count)


def _match_assignment(m):
    rows, cols = linear_sum_assignment(-m)
    perm = np.empty(m.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm, int(m[rows, cols].sum())


def _match(m):
    if m.shape[0] <= _BRUTE_FORCE_MAX:
        return _match_brute(m)
    return _match_assignment(m)


def match_labels(pred, truth):
    """Best one-to-one map from predicted labels to truth labels.

    Returns an int array ``perm`` with ``perm[p]`` the truth label assigned to
    predicted label ``p``, maximizing the number of correctly labeled inliers.
    A count mismatch between predicted and truth labels is handled by padding
    with unused labels.
    """
    m, _ = _confusion(pred, truth)
    perm, _ = _match(m)
    return perm


def misclassification_rate(pred, truth):
    """Percentage of inliers misassigned under the best label matching.

    Exhaustive over all relabelings for up to 8 clusters, assignment solver
    above. Outliers (truth -1) are excluded from both numerator and
    denominator; predictions on them are ignored.
    """
    m, n_inliers = _confusion(pred, truth)
    _, matched = _match(m)
    return 100.0 * (n_inliers - matched) / n_inliers
