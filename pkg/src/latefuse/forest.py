"""Random forest of CART-style trees with class-weighted Gini splits.

Determinism contract: every tree draws all of its randomness from a stream
derived from (forest seed, tree index), and the permutation pass for feature
f in tree t from (forest seed, t, f). Results are therefore bit-identical
for a given seed regardless of how many workers execute the trees.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ModelError, PredictError
from .tables import FeatureTable


@dataclass(frozen=True)
class ForestParams:
    mtry: int
    ntree: int
    min_leaf: int = 1
    seed: int = 0
    weighted: bool = True  # balanced class weighting inside Gini and leaves

    def __post_init__(self) -> None:
        if self.mtry < 1 or self.ntree < 1 or self.min_leaf < 1:
            raise ModelError("mtry, ntree, and min_leaf must all be >= 1")


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; feature == -1 marks a leaf. leaf_prob is the
    class-weighted positive proportion of the node's bootstrap rows."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_prob: np.ndarray

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            live = np.flatnonzero(feat >= 0)
            if live.size == 0:
                return self.leaf_prob[node]
            go_left = x[live, feat[live]] <= self.threshold[node[live]]
            node[live[go_left]] = self.left[node[live[go_left]]]
            node[live[~go_left]] = self.right[node[live[~go_left]]]


@dataclass(frozen=True)
class Forest:
    trees: tuple[Tree, ...]
    bootstrap_indices: tuple[np.ndarray, ...]
    oob_indices: tuple[np.ndarray, ...]
    feature_names: tuple[str, ...]
    params: ForestParams
    class_weights: dict[int, float]
    n_train: int


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple[str, ...]
    mean_decrease: np.ndarray
    std_error: np.ndarray
    normalized: np.ndarray  # mean/SE; 0 when both are 0, +/-inf flagged when SE=0


class _TreeBuilder:
    def __init__(self, x: np.ndarray, y: np.ndarray, weights: np.ndarray,
                 mtry: int, min_leaf: int, rng: np.random.Generator):
        self.x, self.y, self.w = x, y, weights
        self.mtry, self.min_leaf, self.rng = mtry, min_leaf, rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.prob: list[float] = []

    def build(self) -> Tree:
        self._grow(np.arange(self.x.shape[0]))
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            leaf_prob=np.asarray(self.prob, dtype=float),
        )

    def _new_node(self, w1: float, wt: float) -> int:
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.prob.append(w1 / wt)
        return len(self.feature) - 1

    def _grow(self, idx: np.ndarray) -> int:
        y = self.y[idx]
        w = self.w[idx]
        wt = float(w.sum())
        node = self._new_node(float(w[y == 1].sum()), wt)
        if idx.size < 2 * self.min_leaf or y.min() == y.max():
            return node
        split = self._best_split(idx, wt)
        if split is None:
            return node
        feat, thr = split
        go_left = self.x[idx, feat] <= thr
        if go_left.all() or not go_left.any():
            return node  # midpoint rounded onto an endpoint; keep the leaf
        self.feature[node] = feat
        self.threshold[node] = thr
        left_child = self._grow(idx[go_left])
        right_child = self._grow(idx[~go_left])
        self.left[node] = left_child
        self.right[node] = right_child
        return node

    def _best_split(self, idx: np.ndarray, wt: float) -> tuple[int, float] | None:
        """Weighted-Gini search over mtry sampled features; None if no split
        strictly reduces impurity while honoring min_leaf on both sides.

        Gain ties resolve to the earliest feature in draw order, then the
        lowest cut position, so the result is a pure function of the rng.
        """
        n = idx.size
        feats = self.rng.choice(self.x.shape[1], size=self.mtry, replace=False)
        y = self.y[idx]
        w = self.w[idx]
        w1_total = float(w[y == 1].sum())
        parent_cost = float(_gini_cost(w1_total, wt))
        xs = self.x[np.ix_(idx, feats)]  # (n, mtry)
        order = np.argsort(xs, axis=0, kind="stable")
        xso = np.take_along_axis(xs, order, axis=0)
        w_ord = w[order]
        w1_ord = w_ord * (y[order] == 1)
        wl = np.cumsum(w_ord, axis=0)[:-1]
        w1l = np.cumsum(w1_ord, axis=0)[:-1]
        gain = parent_cost - _gini_cost(w1l, wl) - _gini_cost(w1_total - w1l, wt - wl)
        sizes = np.arange(1, n)
        valid = (xso[:-1] != xso[1:]) \
            & ((sizes >= self.min_leaf) & (n - sizes >= self.min_leaf))[:, None]
        gain[~valid] = -np.inf
        flat = np.argmax(gain.T)  # feature-major: draw order first, then cut position
        f_pick, pos = divmod(int(flat), n - 1)
        if gain[pos, f_pick] <= 1e-12:
            return None
        return int(feats[f_pick]), float((xso[pos, f_pick] + xso[pos + 1, f_pick]) / 2.0)


def _gini_cost(w1, wt):
    """Weight-scaled Gini impurity wt * (1 - p0^2 - p1^2); vectorized."""
    w1 = np.asarray(w1, dtype=float)
    wt = np.asarray(wt, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        p1 = np.where(wt > 0, w1 / wt, 0.0)
    return wt * (1.0 - p1 ** 2 - (1.0 - p1) ** 2)


def class_weights_for(y: np.ndarray) -> dict[int, float]:
    """Balanced weights w_c = n / (2 * n_c) for the classes present in y."""
    n = y.size
    return {int(c): n / (2.0 * float(np.sum(y == c))) for c in np.unique(y)}


def _fit_one_tree(x, y, params, tree_index) -> tuple[Tree, np.ndarray, np.ndarray]:
    rng = np.random.default_rng([params.seed, tree_index])
    n = x.shape[0]
    boot = np.sort(rng.integers(0, n, size=n))
    oob = np.setdiff1d(np.arange(n), boot)
    yb = y[boot]
    if params.weighted:
        cw = class_weights_for(yb)
        wb = np.array([cw[int(c)] for c in yb])
    else:
        wb = np.ones(n)
    builder = _TreeBuilder(x[boot], yb, wb, params.mtry, params.min_leaf, rng)
    return builder.build(), boot, oob


def fit_forest(table: FeatureTable, params: ForestParams, n_workers: int = 1) -> Forest:
    """Grow ntree trees on bootstrap samples of the table.

    Balanced class weights (n / 2n_c, recomputed on each tree's bootstrap so
    the weighted class masses are always equal) enter both the Gini criterion
    and the leaf proportions. Trees have no depth limit; growth stops at pure
    nodes, min_leaf, or when no split reduces impurity.
    """
    y = table.labels.astype(np.int8)
    if y.min() == y.max():
        raise ModelError("forest training requires both classes")
    if table.missing.any():
        raise ModelError("forest training requires a fully observed table")
    if params.mtry > table.n_features:
        raise ModelError(f"mtry={params.mtry} exceeds {table.n_features} features")
    x = np.ascontiguousarray(table.values)

    def job(t: int):
        return _fit_one_tree(x, y, params, t)

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            fitted = list(pool.map(job, range(params.ntree)))
    else:
        fitted = [job(t) for t in range(params.ntree)]
    trees, boots, oobs = zip(*fitted)
    return Forest(
        trees=tuple(trees),
        bootstrap_indices=tuple(boots),
        oob_indices=tuple(oobs),
        feature_names=table.feature_names,
        params=params,
        class_weights=class_weights_for(y) if params.weighted else {0: 1.0, 1: 1.0},
        n_train=table.n_samples,
    )


def _check_features(forest: Forest, table: FeatureTable) -> np.ndarray:
    if tuple(table.feature_names) != forest.feature_names:
        raise PredictError("table features do not match the fitted forest")
    if table.missing.any():
        raise PredictError("prediction requires a fully observed table")
    return np.ascontiguousarray(table.values)


def predict_proba(forest: Forest, table: FeatureTable) -> np.ndarray:
    """Arithmetic mean of the per-tree leaf positive proportions."""
    x = _check_features(forest, table)
    acc = np.zeros(x.shape[0])
    for tree in forest.trees:
        acc += tree.predict_proba(x)
    return acc / len(forest.trees)


def _oob_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Permutation used for the importance pass (separable for testing)."""
    return rng.permutation(n)


def oob_permutation_importance(forest: Forest, table: FeatureTable) -> ImportanceReport:
    """Per-tree OOB accuracy drop after permuting each feature column.

    For tree t the unweighted accuracy on its out-of-bag rows is compared
    against the accuracy after shuffling feature f within those rows (stream
    seeded by (seed, t, f)); the differences are averaged over trees and
    normalized by their standard error (sd with ntree-1 denominator, divided
    by sqrt of the number of contributing trees).
    """
    x = _check_features(forest, table)
    y = table.labels.astype(np.int8)
    n_feat = table.n_features
    diffs: list[np.ndarray] = []
    skipped = 0
    for t, tree in enumerate(forest.trees):
        oob = forest.oob_indices[t]
        if oob.size == 0:
            skipped += 1
            continue
        xo = x[oob].copy()
        yo = y[oob]
        base_acc = float(np.mean((tree.predict_proba(xo) >= 0.5) == (yo == 1)))
        used = set(tree.feature[tree.feature >= 0].tolist())
        row = np.zeros(n_feat)  # unused features keep an exact 0 difference
        for f in used:
            rng = np.random.default_rng([forest.params.seed, t, f])
            perm = _oob_permutation(rng, oob.size)
            original = xo[:, f].copy()
            xo[:, f] = original[perm]
            perm_acc = float(np.mean((tree.predict_proba(xo) >= 0.5) == (yo == 1)))
            xo[:, f] = original
            row[f] = base_acc - perm_acc
        diffs.append(row)
    if skipped:
        warnings.warn(f"{skipped} tree(s) had no out-of-bag rows and were skipped")
    if not diffs:
        raise ModelError("no tree had out-of-bag rows; cannot compute importance")
    d = np.vstack(diffs)
    t_count = d.shape[0]
    mean = d.mean(axis=0)
    sd = d.std(axis=0, ddof=1) if t_count > 1 else np.zeros(n_feat)
    se = sd / math.sqrt(t_count)
    normalized = np.zeros(n_feat)
    nz = se > 0
    normalized[nz] = mean[nz] / se[nz]
    degenerate = ~nz & (mean != 0)
    if degenerate.any():
        normalized[degenerate] = np.sign(mean[degenerate]) * math.inf
        warnings.warn("some features have zero standard error with nonzero mean "
                      "importance; reported as infinite")
    return ImportanceReport(
        feature_names=table.feature_names,
        mean_decrease=mean,
        std_error=se,
        normalized=normalized,
    )


def to_doc(forest: Forest) -> dict:
    """Versioned text-serializable document with flat per-tree node arrays."""
    return {
        "format": "latefuse-forest",
        "version": 1,
        "feature_names": list(forest.feature_names),
        "params": {"mtry": forest.params.mtry, "ntree": forest.params.ntree,
                   "min_leaf": forest.params.min_leaf, "seed": forest.params.seed,
                   "weighted": forest.params.weighted},
        "class_weights": {str(k): v for k, v in forest.class_weights.items()},
        "n_train": forest.n_train,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": [None if math.isnan(v) else v for v in t.threshold.tolist()],
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "leaf_prob": t.leaf_prob.tolist(),
            }
            for t in forest.trees
        ],
        "bootstrap_indices": [b.tolist() for b in forest.bootstrap_indices],
        "oob_indices": [o.tolist() for o in forest.oob_indices],
    }


def from_doc(doc: dict) -> Forest:
    if doc.get("format") != "latefuse-forest" or doc.get("version") != 1:
        raise ModelError("unrecognized forest document")
    trees = tuple(
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray([math.nan if v is None else v for v in t["threshold"]]),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            leaf_prob=np.asarray(t["leaf_prob"], dtype=float),
        )
        for t in doc["trees"]
    )
    p = doc["params"]
    return Forest(
        trees=trees,
        bootstrap_indices=tuple(np.asarray(b, dtype=np.int64) for b in doc["bootstrap_indices"]),
        oob_indices=tuple(np.asarray(o, dtype=np.int64) for o in doc["oob_indices"]),
        feature_names=tuple(doc["feature_names"]),
        params=ForestParams(mtry=p["mtry"], ntree=p["ntree"], min_leaf=p["min_leaf"],
                            seed=p["seed"], weighted=p.get("weighted", True)),
        class_weights={int(k): float(v) for k, v in doc["class_weights"].items()},
        n_train=int(doc["n_train"]),
    )
