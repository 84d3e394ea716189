"""Bagged regression trees grown to purity on variance reduction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import NoSamples

N_TREES = 50
MIN_SPLIT = 5


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(len(X), dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active[idx] = self.feature[node[idx]] >= 0
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.intp),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.intp),
            np.asarray(d["right"], dtype=np.intp),
            np.asarray(d["value"], dtype=np.float64),
        )

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True, eq=False)
class ForestModel:
    trees: tuple[Tree, ...] = field(repr=False)
    seed: int
    n_features: int

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)


def _best_split(Xn: np.ndarray, yn: np.ndarray, features) -> tuple[int, float, float]:
    """Lowest summed child SSE over midpoints of distinct sorted values."""
    best = (-1, 0.0, math.inf)
    yc = yn - yn.mean()
    m = len(yc)
    for f in features:
        order = np.argsort(Xn[:, f], kind="stable")
        xs = Xn[order, f]
        ys = yc[order]
        cut = np.flatnonzero(xs[:-1] < xs[1:])
        if cut.size == 0:
            continue
        s1 = np.cumsum(ys)
        s2 = np.cumsum(ys * ys)
        n_left = cut + 1.0
        n_right = m - n_left
        sse = (s2[cut] - s1[cut] ** 2 / n_left
               + (s2[-1] - s2[cut]) - (s1[-1] - s1[cut]) ** 2 / n_right)
        pos = int(np.argmin(sse))
        if sse[pos] < best[2]:
            lo, hi = xs[cut[pos]], xs[cut[pos] + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (int(f), float(thr), float(sse[pos]))
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator, mtry: int) -> Tree:
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node() -> int:
        for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0.0)):
            arr.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        value[node] = float(yn.mean())
        if len(idx) < MIN_SPLIT:
            continue
        parent_sse = float(np.sum((yn - yn.mean()) ** 2))
        if parent_sse <= 0.0:
            continue
        feats = rng.choice(X.shape[1], size=mtry, replace=False)
        f, thr, sse = _best_split(X[idx], yn, feats)
        if f < 0 or sse >= parent_sse * (1.0 - 1e-12):
            continue
        go_left = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        lnode, rnode = new_node(), new_node()
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is numbered first
        stack.append((rnode, idx[~go_left]))
        stack.append((lnode, idx[go_left]))

    return Tree(
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(value, dtype=np.float64),
    )


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, index])


def bootstrap_indices(n: int, seed: int, index: int) -> np.ndarray:
    return _tree_rng(seed, index).integers(0, n, size=n)


def train_forest(X, y, seed: int = 0, n_trees: int = N_TREES,
                 mtry: int | None = None) -> ForestModel:
    """Random forest: bootstrap per tree, ``ceil(d/3)`` candidate features per node."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(y) == 0:
        raise NoSamples("cannot train a forest on zero samples")
    n, d = X.shape
    mtry = mtry or max(1, math.ceil(d / 3))
    trees = []
    for t in range(n_trees):
        rng = _tree_rng(seed, t)
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], rng, mtry))
    return ForestModel(tuple(trees), seed, d)


def predict_forest(model: ForestModel, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = model.predict(x)
    return float(out[0]) if x.ndim == 1 else out


def oob_predictions(model: ForestModel, X, y=None) -> np.ndarray:
    """Out-of-bag prediction per training row (NaN if every tree saw it)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n = len(X)
    total = np.zeros(n)
    count = np.zeros(n)
    for t, tree in enumerate(model.trees):
        out = np.ones(n, dtype=bool)
        out[bootstrap_indices(n, model.seed, t)] = False
        if out.any():
            total[out] += tree.predict(X[out])
            count[out] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return total / count
