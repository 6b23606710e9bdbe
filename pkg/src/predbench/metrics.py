"""Correlation and rank-correlation metrics used to score predictors.

All metrics return NaN (the undefined-metric sentinel) when either input has
zero variance, and require finite inputs; use `sanitize_scores` to map
degenerate predictor scores to the bottom rank first.
"""

import numpy as np

from .errors import InvalidArgument

METRIC_NAMES = ("pearson", "spearman", "kendall_tau", "sparse_kendall_tau")

DEFAULT_SPARSE_RESOLUTION = 0.001


def sanitize_scores(scores) -> np.ndarray:
    """Replace non-finite scores (degenerate-score sentinels) with a value
    strictly below every finite score, so they share the bottom rank."""
    out = np.asarray(scores, dtype=float).copy()
    bad = ~np.isfinite(out)
    if bad.any():
        finite = out[~bad]
        floor = finite.min() - 1.0 if finite.size else 0.0
        out[bad] = floor
    return out


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape:
        raise InvalidArgument("metric inputs must be 1-d arrays of equal length")
    if x.size < 2:
        raise InvalidArgument("metrics need at least two points")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidArgument("metric inputs must be finite; sanitize scores first")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    dx = x - x.mean()
    dy = y - y.mean()
    sx2 = (dx * dx).sum()
    sy2 = (dy * dy).sum()
    if sx2 == 0.0 or sy2 == 0.0:
        return float("nan")
    # single sqrt of the product so identical deviation vectors give 1.0 exactly
    return float((dx * dy).sum() / np.sqrt(sx2 * sy2))


def average_ranks(v) -> np.ndarray:
    """1-based ranks with ties assigned the mean of their rank range."""
    v = np.asarray(v, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    x, y = _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall rank correlation (the tau-b variant)."""
    x, y = _check_pair(x, y)
    n = x.size
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    s = float((dx[iu] * dy[iu]).sum())
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(x)
    n2 = _tie_pairs(y)
    if n0 == n1 or n0 == n2:
        return float("nan")
    # exact integer product under the sqrt keeps tau(x, x) at exactly 1.0
    return s / np.sqrt(float((n0 - n1) * (n0 - n2)))


def _tie_pairs(v) -> int:
    _, counts = np.unique(v, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def sparse_kendall_tau(x, y, resolution: float = DEFAULT_SPARSE_RESOLUTION) -> float:
    """Kendall tau-b after rounding ground-truth values `y` to `resolution`,
    so that differences below measurement noise count as ties."""
    if resolution < 0:
        raise InvalidArgument("resolution must be >= 0")
    x, y = _check_pair(x, y)
    if resolution > 0:
        y = np.round(y / resolution) * resolution
    return kendall_tau(x, y)


def compute_all(scores, truth) -> dict[str, float]:
    """All four metrics of predictor `scores` against ground-truth `truth`."""
    x = sanitize_scores(scores)
    y = np.asarray(truth, dtype=float)
    return {
        "pearson": pearson(x, y),
        "spearman": spearman(x, y),
        "kendall_tau": kendall_tau(x, y),
        "sparse_kendall_tau": sparse_kendall_tau(x, y),
    }
