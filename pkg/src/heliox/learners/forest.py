"""Regression random forest built from scratch.

One forest of 20 trees is fit per forecast step on bootstrap resamples of
the flattened window features.  Node splits minimize the child-weighted
squared error over an exhaustive threshold scan of a seeded random feature
subset of size ceil(sqrt(d)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import InsufficientData, check_matrix


@dataclass(frozen=True)
class ForestHyperparams:
    n_trees: int = 20
    min_leaf: int = 2
    max_depth: int = 32
    #: features scanned per node; None = ceil(sqrt(d))
    n_feature_candidates: int | None = None
    seed: int = 0


def find_best_split(X, y, feature_indices, min_leaf):
    """Exhaustive best split over the given features.

    Scans midpoints between consecutive distinct sorted values and minimizes
    the summed squared error of the two children; splits leaving a child
    smaller than min_leaf are not considered.  Returns
    (feature, threshold, sse) or None when no admissible split exists.
    """
    n = len(y)
    best = None
    for f in feature_indices:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys**2)
        total_sum, total_sq = csum[-1], csq[-1]

        sizes = np.arange(1, n)
        valid = (sizes >= min_leaf) & (n - sizes >= min_leaf) & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        left_sum = csum[:-1]
        left_sq = csq[:-1]
        sse_left = left_sq - left_sum**2 / sizes
        right_sum = total_sum - left_sum
        sse_right = (total_sq - left_sq) - right_sum**2 / (n - sizes)
        sse = np.where(valid, sse_left + sse_right, np.inf)
        k = int(np.argmin(sse))
        if best is None or sse[k] < best[2]:
            best = (int(f), float((xs[k] + xs[k + 1]) / 2.0), float(sse[k]))
    return best


class Tree:
    """Array-encoded binary regression tree; feature -1 marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def _add(self, feature, threshold, value) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.feature) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        return self

    def predict(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        out = np.empty(len(X))
        active = np.arange(len(X))
        while len(active):
            cur = node[active]
            at_leaf = self.feature[cur] < 0
            leaves = active[at_leaf]
            out[leaves] = self.value[node[leaves]]
            active = active[~at_leaf]
            cur = node[active]
            go_left = X[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
        return out


def build_tree(X, y, hp: ForestHyperparams, rng: np.random.Generator) -> Tree:
    d = X.shape[1]
    k = hp.n_feature_candidates or math.ceil(math.sqrt(d))
    k = min(k, d)
    tree = Tree()

    def grow(idx: np.ndarray, depth: int) -> int:
        node = tree._add(-1, 0.0, float(y[idx].mean()))
        if depth >= hp.max_depth or len(idx) < 2 * hp.min_leaf or np.ptp(y[idx]) == 0.0:
            return node
        features = np.sort(rng.choice(d, size=k, replace=False))
        best = find_best_split(X[idx], y[idx], features, hp.min_leaf)
        if best is None:
            return node
        feature, threshold, _ = best
        go_left = X[idx, feature] <= threshold
        tree.feature[node] = feature
        tree.threshold[node] = threshold
        tree.left[node] = grow(idx[go_left], depth + 1)
        tree.right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(y)), 0)
    return tree.finalize()


class ForestRegressor:
    """Per-step random forests over flattened window features."""

    def __init__(self, hp: ForestHyperparams | None = None, n_outputs: int = 6):
        self.hp = hp or ForestHyperparams()
        self.n_outputs = n_outputs

    def get_params(self) -> dict:
        return {"hp": self.hp, "n_outputs": self.n_outputs}

    def set_params(self, **params) -> "ForestRegressor":
        for k, v in params.items():
            if not hasattr(self, k):
                raise ValueError(f"unknown parameter {k!r}")
            setattr(self, k, v)
        return self

    def fit(self, X, Y) -> "ForestRegressor":
        X = check_matrix(X)
        Y = check_matrix(Y, self.n_outputs, name="Y")
        n = len(X)
        if n < 2 * self.hp.min_leaf:
            raise InsufficientData(f"{n} windows < 2 * min_leaf")
        self.n_features_ = X.shape[1]
        root = np.random.SeedSequence(self.hp.seed)
        step_seeds = root.spawn(self.n_outputs)
        self.forests_ = []
        for s in range(self.n_outputs):
            tree_seeds = step_seeds[s].spawn(self.hp.n_trees)
            trees = []
            for t in range(self.hp.n_trees):
                rng = np.random.default_rng(tree_seeds[t])
                bootstrap = rng.integers(0, n, size=n)
                trees.append(build_tree(X[bootstrap], Y[bootstrap, s], self.hp, rng))
            self.forests_.append(trees)
        return self

    def predict(self, X) -> np.ndarray:
        X = check_matrix(X, self.n_features_)
        out = np.empty((len(X), self.n_outputs))
        for s, trees in enumerate(self.forests_):
            out[:, s] = np.mean([t.predict(X) for t in trees], axis=0)
        return out

    # -- persistence ------------------------------------------------------

    def parameter_blocks(self) -> list[tuple[str, np.ndarray]]:
        blocks = []
        for s, trees in enumerate(self.forests_):
            for t, tree in enumerate(trees):
                prefix = f"s{s}_t{t}_"
                blocks.append((prefix + "feature", tree.feature))
                blocks.append((prefix + "threshold", tree.threshold))
                blocks.append((prefix + "left", tree.left))
                blocks.append((prefix + "right", tree.right))
                blocks.append((prefix + "value", tree.value))
        return blocks

    def shape_header(self) -> dict:
        return {
            "n_trees": self.hp.n_trees,
            "min_leaf": self.hp.min_leaf,
            "max_depth": self.hp.max_depth,
            "n_feature_candidates": self.hp.n_feature_candidates,
            "seed": self.hp.seed,
            "n_outputs": self.n_outputs,
            "n_features": self.n_features_,
        }

    @classmethod
    def from_blocks(cls, header: dict, blocks: dict) -> "ForestRegressor":
        hp = ForestHyperparams(
            n_trees=header["n_trees"],
            min_leaf=header["min_leaf"],
            max_depth=header["max_depth"],
            n_feature_candidates=header["n_feature_candidates"],
            seed=header["seed"],
        )
        model = cls(hp=hp, n_outputs=header["n_outputs"])
        model.n_features_ = header["n_features"]
        model.forests_ = []
        for s in range(model.n_outputs):
            trees = []
            for t in range(hp.n_trees):
                prefix = f"s{s}_t{t}_"
                tree = Tree()
                tree.feature = blocks[prefix + "feature"]
                tree.threshold = blocks[prefix + "threshold"]
                tree.left = blocks[prefix + "left"]
                tree.right = blocks[prefix + "right"]
                tree.value = blocks[prefix + "value"]
                trees.append(tree)
            model.forests_.append(trees)
        return model
