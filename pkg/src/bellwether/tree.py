"""CART regression tree grown by greedy variance reduction."""

from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import MINIMIZE, MeasurementTable

_LEAF = -1


def _best_split(X: np.ndarray, y: np.ndarray, min_samples_leaf: int):
    """Best (feature, threshold, gain) over midpoints of sorted distinct values.

    Returns None when no admissible split reduces the sum of squared errors.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    n = X.shape[0]
    yc = y - y.mean()
    parent_sse = float(yc @ yc)
    if parent_sse <= 0.0:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    Xs = np.take_along_axis(X, order, axis=0)
    left_sum = np.cumsum(yc[order], axis=0)[:-1]
    total = yc.sum()
    n_left = np.arange(1, n, dtype=float)[:, None]
    n_right = n - n_left
    gain = left_sum**2 / n_left + (total - left_sum) ** 2 / n_right - total**2 / n
    valid = (Xs[1:] > Xs[:-1]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    gain = np.where(valid, gain, -np.inf)
    best = gain.max()
    if not np.isfinite(best) or best <= 1e-12 * parent_sse:
        return None
    near = gain >= best - 1e-12 * parent_sse
    j = int(np.flatnonzero(near.any(axis=0))[0])
    i = int(np.flatnonzero(near[:, j])[0])
    threshold = 0.5 * (Xs[i, j] + Xs[i + 1, j])
    return j, float(threshold), float(gain[i, j])


class RegressionTree(RegressorMixin, BaseEstimator):
    """Binary regression tree; leaves predict the mean of their training rows.

    Parameters
    ----------
    min_samples_leaf : int, default=2
        Minimum number of training rows on each side of a split.
    max_depth : int or None, default=None
        Depth limit; ``0`` yields the global-mean predictor.
    """

    def __init__(self, min_samples_leaf: int = 2, max_depth: int | None = None):
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        self.n_features_in_ = X.shape[1]
        self.degenerate_ = X.shape[0] < 2 * self.min_samples_leaf

        feature, threshold, left, right, value, count, sse = [], [], [], [], [], [], []

        def new_node(idx):
            yy = y[idx]
            feature.append(_LEAF)
            threshold.append(np.nan)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(float(yy.mean()))
            count.append(len(idx))
            sse.append(float(((yy - yy.mean()) ** 2).sum()))
            return len(feature) - 1

        root = new_node(np.arange(X.shape[0]))
        stack = [(root, np.arange(X.shape[0]), 0)]
        max_depth_seen = 0
        while stack:
            node, idx, depth = stack.pop()
            max_depth_seen = max(max_depth_seen, depth)
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if len(idx) < 2 * self.min_samples_leaf:
                continue
            split = _best_split(X[idx], y[idx], self.min_samples_leaf)
            if split is None:
                continue
            j, thr, _ = split
            go_left = X[idx, j] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = j, thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            # right pushed first so the left subtree is numbered first
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=int)
        self.threshold_ = np.array(threshold, dtype=float)
        self.children_left_ = np.array(left, dtype=int)
        self.children_right_ = np.array(right, dtype=int)
        self.value_ = np.array(value, dtype=float)
        self.n_node_samples_ = np.array(count, dtype=int)
        self.node_sse_ = np.array(sse, dtype=float)
        self.depth_ = max_depth_seen
        return self

    @property
    def n_leaves_(self) -> int:
        check_is_fitted(self, "feature_")
        return int((self.feature_ == _LEAF).sum())

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row lands in."""
        check_is_fitted(self, "feature_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=int)
        rows = np.arange(X.shape[0])
        active = self.feature_[node] != _LEAF
        while active.any():
            r = rows[active]
            nd = node[r]
            go_left = X[r, self.feature_[nd]] <= self.threshold_[nd]
            node[r] = np.where(go_left, self.children_left_[nd], self.children_right_[nd])
            active = self.feature_[node] != _LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return self.value_[self.apply(X)]

    def predict_one(self, config: Sequence[float]) -> float:
        return float(self.predict(np.asarray(config, dtype=float).reshape(1, -1))[0])

    def training_sse(self) -> float:
        check_is_fitted(self, "feature_")
        return float(self.node_sse_[self.feature_ == _LEAF].sum())

    def export_text(self, feature_names: Sequence[str] | None = None) -> str:
        """Indented ``option <= threshold`` dump, for debugging only."""
        check_is_fitted(self, "feature_")
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(self.n_features_in_)]
        lines = []

        def walk(node, depth):
            pad = "|   " * depth
            if self.feature_[node] == _LEAF:
                lines.append(f"{pad}value: {self.value_[node]:.6g} (n={self.n_node_samples_[node]})")
                return
            name, thr = names[self.feature_[node]], self.threshold_[node]
            lines.append(f"{pad}{name} <= {thr:.6g}")
            walk(self.children_left_[node], depth + 1)
            lines.append(f"{pad}{name} >  {thr:.6g}")
            walk(self.children_right_[node], depth + 1)

        walk(0, 0)
        return "\n".join(lines)


def fit_tree(table: MeasurementTable, min_samples_leaf: int = 2, max_depth: int | None = None) -> RegressionTree:
    return RegressionTree(min_samples_leaf=min_samples_leaf, max_depth=max_depth).fit(table.X, table.perf)


class BestPrediction(NamedTuple):
    index: int
    config: tuple
    predicted: float


def predict_best(model, candidates, objective: str = MINIMIZE) -> BestPrediction:
    """Candidate with the extremal prediction; ties go to the lowest index."""
    C = np.asarray(candidates, dtype=float)
    if C.ndim != 2 or C.shape[0] == 0:
        raise ValueError("candidates must be a non-empty 2-D collection")
    pred = model.predict(C)
    i = int(np.argmin(pred) if objective == MINIMIZE else np.argmax(pred))
    return BestPrediction(i, tuple(C[i].tolist()), float(pred[i]))
