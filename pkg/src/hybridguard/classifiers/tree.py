"""CART decision trees (Gini impurity) and a bagged random forest."""

from __future__ import annotations

import math

import numpy as np


def gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p * p).sum())


def best_split(x: np.ndarray, y: np.ndarray, n_classes: int, features) -> tuple[int, float, float] | None:
    """Lowest weighted Gini over midpoints of sorted unique values.

    Returns ``(feature, threshold, impurity)``; rows with ``x <= threshold`` go left.
    Ties keep the earliest feature in ``features`` and then the smallest threshold.
    """
    n = y.size
    onehot = np.zeros((n, n_classes))
    best = None
    for j in features:
        order = np.argsort(x[:, j], kind="stable")
        xs = x[order, j]
        valid = np.flatnonzero(xs[:-1] < xs[1:])
        if valid.size == 0:
            continue
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[valid]
        right = onehot.sum(axis=0) - left
        n_left = (valid + 1).astype(np.float64)
        n_right = n - n_left
        g_left = 1.0 - ((left / n_left[:, None]) ** 2).sum(axis=1)
        g_right = 1.0 - ((right / n_right[:, None]) ** 2).sum(axis=1)
        impurity = (n_left * g_left + n_right * g_right) / n
        k = int(np.argmin(impurity))
        if best is None or impurity[k] < best[2]:
            lo, hi = xs[valid[k]], xs[valid[k] + 1]
            threshold = (lo + hi) / 2.0
            if not threshold < hi:
                threshold = lo
            best = (int(j), float(threshold), float(impurity[k]))
    return best


class DecisionTree:
    """Array-backed CART tree. Leaves keep their class-count histograms."""

    def __init__(self, max_depth=None, min_samples_split=2, max_features=None, seed=0):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.seed = seed

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(self.seed)
        d = x.shape[1]
        feature, threshold, left, right, counts = [], [], [], [], []

        def new_node(rows):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(np.bincount(y[rows], minlength=n_classes))
            return len(feature) - 1

        stack = [(new_node(np.arange(y.size)), np.arange(y.size), 0)]
        while stack:
            node, rows, depth = stack.pop()
            hist = counts[node]
            if (
                np.count_nonzero(hist) <= 1
                or rows.size < self.min_samples_split
                or (self.max_depth is not None and depth >= self.max_depth)
            ):
                continue
            if self.max_features is None or self.max_features >= d:
                candidates = range(d)
            else:
                candidates = rng.choice(d, size=self.max_features, replace=False)
            split = best_split(x[rows], y[rows], n_classes, candidates)
            if split is None:
                continue
            j, t, _ = split
            goes_left = x[rows, j] <= t
            feature[node], threshold[node] = j, t
            l_rows, r_rows = rows[goes_left], rows[~goes_left]
            left[node] = new_node(l_rows)
            right[node] = new_node(r_rows)
            stack.append((right[node], r_rows, depth + 1))
            stack.append((left[node], l_rows, depth + 1))

        self.n_classes = n_classes
        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold, dtype=np.float64)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.counts_ = np.array(counts, dtype=np.int64).reshape(len(counts), n_classes)
        return self

    def apply(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = self.feature_[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = x[idx, self.feature_[cur]] <= self.threshold_[cur]
            node[idx] = np.where(go_left, self.left_[cur], self.right_[cur])
            active = self.feature_[node] >= 0
        return node

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        hist = self.counts_[self.apply(x)].astype(np.float64)
        return hist / hist.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.counts_[self.apply(x)], axis=1)

    @property
    def n_nodes(self) -> int:
        return self.feature_.size

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "counts": self.counts_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTree":
        tree = cls(payload["max_depth"], payload["min_samples_split"], payload["max_features"], payload["seed"])
        tree.n_classes = payload["n_classes"]
        tree.feature_ = np.asarray(payload["feature"], dtype=np.int64)
        tree.threshold_ = np.asarray(payload["threshold"], dtype=np.float64)
        tree.left_ = np.asarray(payload["left"], dtype=np.int64)
        tree.right_ = np.asarray(payload["right"], dtype=np.int64)
        tree.counts_ = np.asarray(payload["counts"], dtype=np.int64).reshape(-1, tree.n_classes)
        return tree


def majority_vote(votes: np.ndarray, n_classes: int) -> np.ndarray:
    """Per-row vote frequencies for a (rows x trees) matrix of class ids."""
    freq = np.zeros((votes.shape[0], n_classes))
    for t in range(votes.shape[1]):
        freq[np.arange(votes.shape[0]), votes[:, t]] += 1.0
    return freq / votes.shape[1]


class RandomForest:
    """Bootstrap-bagged CART trees; tree ``i`` is seeded with ``seed + i``.

    Predictions are majority votes and ties go to the lowest class id.
    """

    def __init__(self, n_trees=100, max_depth=None, min_samples_split=2, max_features="sqrt", bootstrap=True, seed=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed

    def _features_per_split(self, d: int) -> int:
        if self.max_features == "sqrt":
            return max(1, math.isqrt(d))
        if self.max_features is None:
            return d
        return max(1, min(int(self.max_features), d))

    def fit(self, x: np.ndarray, y: np.ndarray, n_classes: int):
        m = self._features_per_split(x.shape[1])
        self.n_classes = n_classes
        self.trees_ = []
        for i in range(self.n_trees):
            rng = np.random.default_rng(self.seed + i)
            rows = rng.integers(0, y.size, size=y.size) if self.bootstrap else np.arange(y.size)
            tree = DecisionTree(self.max_depth, self.min_samples_split, m, self.seed + i)
            self.trees_.append(tree.fit(x[rows], y[rows], n_classes, rng))
        return self

    def votes(self, x: np.ndarray) -> np.ndarray:
        return np.column_stack([tree.predict(x) for tree in self.trees_])

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return majority_vote(self.votes(x), self.n_classes)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(x), axis=1)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "seed": self.seed,
            "n_classes": self.n_classes,
            "trees": [t.to_dict() for t in self.trees_],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RandomForest":
        forest = cls(
            payload["n_trees"],
            payload["max_depth"],
            payload["min_samples_split"],
            payload["max_features"],
            payload["bootstrap"],
            payload["seed"],
        )
        forest.n_classes = payload["n_classes"]
        forest.trees_ = [DecisionTree.from_dict(t) for t in payload["trees"]]
        return forest
