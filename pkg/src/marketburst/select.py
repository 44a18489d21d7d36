"""Feature normalization and selection for event classification.

Two selectors are provided: a correlation-based subset search (merit
heuristic with best-first forward expansion) and an information-gain
ranking over equal-frequency discretized features. Both follow the
fit/transform estimator convention.
"""

from __future__ import annotations

import heapq
import logging
import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

logger = logging.getLogger(__name__)


def check_binary_labels(y: np.ndarray) -> np.ndarray:
    """Validate 0/1 labels with both classes present."""
    y = np.asarray(y)
    classes = np.unique(y)
    if not np.all(np.isin(classes, (0, 1))):
        raise ValueError(f"labels must be 0/1, got classes {classes}")
    if len(classes) < 2:
        raise ValueError("labels are degenerate: only one class present")
    return y.astype(np.int64)


def _pearson_abs(a: np.ndarray, b: np.ndarray) -> float:
    da = a - a.mean()
    db = b - b.mean()
    na = math.sqrt(float((da * da).sum()))
    nb = math.sqrt(float((db * db).sum()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return abs(float((da * db).sum()) / (na * nb))


class ColumnNormalizer(BaseEstimator, TransformerMixin):
    """Zero-mean unit-variance scaling that drops constant columns.

    Attributes after fit: ``kept_`` (retained column indices),
    ``means_`` and ``stds_`` (statistics of the retained columns).
    """

    def fit(self, X, y=None) -> "ColumnNormalizer":
        X = check_array(X, ensure_min_samples=2)
        stds = X.std(axis=0)
        kept = np.flatnonzero(stds > 0)
        if len(kept) < X.shape[1]:
            dropped = sorted(set(range(X.shape[1])) - set(kept.tolist()))
            logger.warning("dropping %d zero-variance columns: %s",
                           len(dropped), dropped)
        if len(kept) == 0:
            raise ValueError("all columns are constant; nothing to normalize")
        self.n_features_in_ = X.shape[1]
        self.kept_ = kept
        self.means_ = X[:, kept].mean(axis=0)
        self.stds_ = stds[kept]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "kept_")
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = check_array(np.atleast_2d(X))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} columns, got {X.shape[1]}"
            )
        out = (X[:, self.kept_] - self.means_) / self.stds_
        return out[0] if single else out


def subset_merit(
    subset: tuple[int, ...], label_corr: np.ndarray, feat_corr: np.ndarray
) -> float:
    """Merit of a feature subset: relevance scaled against redundancy.

    merit = k * mean(|corr(f, y)|) / sqrt(k + k (k-1) mean(|corr(f, f')|))
    """
    k = len(subset)
    if k == 0:
        return 0.0
    idx = np.asarray(subset)
    r_cf = float(label_corr[idx].mean())
    if k == 1:
        return r_cf
    sub = feat_corr[np.ix_(idx, idx)]
    r_ff = float((sub.sum() - np.trace(sub)) / (k * (k - 1)))
    return k * r_cf / math.sqrt(k + k * (k - 1) * r_ff)


class CfsSelector(BaseEstimator, TransformerMixin):
    """Correlation-based feature subset selection.

    Best-first forward search over subsets, expanding the currently
    best-scoring frontier state by one feature at a time and stopping
    after ``patience`` consecutive expansions that fail to improve the
    best merit seen.
    """

    method = "cfs"

    def __init__(self, patience: int = 5):
        self.patience = patience

    def fit(self, X, y) -> "CfsSelector":
        X, y = check_X_y(X, y)
        y = check_binary_labels(y)
        n_feat = X.shape[1]
        yf = y.astype(np.float64)
        label_corr = np.array([_pearson_abs(X[:, j], yf) for j in range(n_feat)])
        feat_corr = np.eye(n_feat)
        for i in range(n_feat):
            for j in range(i + 1, n_feat):
                c = _pearson_abs(X[:, i], X[:, j])
                feat_corr[i, j] = feat_corr[j, i] = c

        def merit(subset: tuple[int, ...]) -> float:
            return subset_merit(subset, label_corr, feat_corr)

        best_subset = (int(np.argmax(label_corr)),)
        best_merit = merit(best_subset)
        # heap orders by negated merit; counter breaks ties deterministically
        frontier: list[tuple[float, int, tuple[int, ...]]] = []
        seen: set[tuple[int, ...]] = {best_subset}
        counter = 0
        heapq.heappush(frontier, (-best_merit, counter, best_subset))
        stalls = 0
        while frontier and stalls < self.patience:
            _, _, state = heapq.heappop(frontier)
            improved = False
            for j in range(n_feat):
                if j in state:
                    continue
                child = tuple(sorted(state + (j,)))
                if child in seen:
                    continue
                seen.add(child)
                m = merit(child)
                counter += 1
                heapq.heappush(frontier, (-m, counter, child))
                if m > best_merit:
                    best_merit, best_subset = m, child
                    improved = True
            stalls = 0 if improved else stalls + 1
        self.n_features_in_ = n_feat
        self.support_ = np.asarray(sorted(best_subset), dtype=np.int64)
        self.scores_ = label_corr
        self.merit_ = best_merit
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "support_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return X[self.support_]
        return check_array(X)[:, self.support_]


def _entropy_bits(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def information_gain(column: np.ndarray, y: np.ndarray, bins: int) -> float:
    """Mutual information (bits) between a discretized feature and labels.

    The feature is cut at its equal-frequency quantiles; duplicate
    quantile edges collapse, and a constant column scores 0.
    """
    edges = np.unique(np.quantile(column, np.linspace(0.0, 1.0, bins + 1)))
    if len(edges) <= 2:
        assignments = np.zeros(len(column), dtype=np.int64)
    else:
        assignments = np.clip(
            np.searchsorted(edges[1:-1], column, side="right"), 0, len(edges) - 2
        )
    h_y = _entropy_bits(np.bincount(y))
    cond = 0.0
    n = len(y)
    for b in np.unique(assignments):
        mask = assignments == b
        cond += mask.sum() / n * _entropy_bits(np.bincount(y[mask]))
    return max(0.0, h_y - cond)


class InfoGainSelector(BaseEstimator, TransformerMixin):
    """Rank features by information gain; keep strictly positive scores."""

    method = "infogain"

    def __init__(self, bins: int = 10):
        self.bins = bins

    def fit(self, X, y) -> "InfoGainSelector":
        X, y = check_X_y(X, y)
        y = check_binary_labels(y)
        scores = np.array([
            information_gain(X[:, j], y, self.bins) for j in range(X.shape[1])
        ])
        order = sorted(range(X.shape[1]), key=lambda j: (-scores[j], j))
        self.n_features_in_ = X.shape[1]
        self.scores_ = scores
        self.support_ = np.asarray(
            [j for j in order if scores[j] > 0], dtype=np.int64
        )
        if len(self.support_) == 0:
            raise ValueError("no feature carries information about the labels")
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "support_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return X[self.support_]
        return check_array(X)[:, self.support_]
