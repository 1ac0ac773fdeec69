"""Random Forest of CART trees with split-frequency feature importance.

Trees are grown on bootstrap samples with Gini impurity. Every tree draws
its randomness from ``SeedSequence([random_state, tree_index])`` so the
forest is identical whether trees are grown sequentially or in parallel.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import check_features
from .exceptions import DataError

FORMAT_VERSION = 1

SEIZURE = 1
NON_SEIZURE = 0


@dataclass
class Tree:
    """Flat array form of one fitted tree.

    Leaves have ``feature == -1``; ``value`` holds bootstrap class counts
    for every node. Samples go left when ``x[feature] <= threshold``.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity_decrease: np.ndarray

    @property
    def n_internal(self):
        return int(np.count_nonzero(self.feature >= 0))

    def apply(self, X):
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while np.any(active):
            r = rows[active]
            n = node[r]
            go_left = X[r, self.feature[n]] <= self.threshold[n]
            node[r] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict_proba(self, X):
        counts = self.value[self.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "impurity_decrease": self.impurity_decrease.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            feature=np.asarray(d["feature"], dtype=np.intp),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.intp),
            right=np.asarray(d["right"], dtype=np.intp),
            value=np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
            impurity_decrease=np.asarray(d["impurity_decrease"], dtype=np.float64),
        )


def _gini_cost(counts, n):
    # n * gini = n - sum(c^2) / n
    return n - np.sum(counts * counts, axis=-1) / n


def _best_split(X, rows, w, y, n_classes, features, min_samples_leaf):
    """Best Gini split of ``rows`` over candidate ``features``.

    Returns ``(feature, threshold, cost)`` where cost is the summed
    ``n * gini`` of the children, or ``None`` when no candidate can split.
    Ties go to the candidate listed first, then the lowest threshold.
    """
    V = X[np.ix_(rows, features)].T  # (k, n)
    order = np.argsort(V, axis=1, kind="stable")
    Vs = np.take_along_axis(V, order, axis=1)
    w_rows = w[rows]
    y_rows = y[rows]
    n_left = np.cumsum(w_rows[order], axis=1)[:, :-1]
    n_node = w_rows.sum()
    n_right = n_node - n_left
    sq_left = np.zeros_like(n_left)
    sq_right = np.zeros_like(n_left)
    for c in range(n_classes):
        wc = np.where(y_rows == c, w_rows, 0.0)
        total = wc.sum()
        if total == 0:
            continue
        cl = np.cumsum(wc[order], axis=1)[:, :-1]
        sq_left += cl * cl
        cr = total - cl
        sq_right += cr * cr
    valid = (Vs[:, :-1] < Vs[:, 1:]) & (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
    if not np.any(valid):
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = n_node - sq_left / n_left - sq_right / n_right
    cost = np.where(valid, cost, np.inf)
    flat = int(np.argmin(cost))
    j, i = divmod(flat, cost.shape[1])
    lo, hi = Vs[j, i], Vs[j, i + 1]
    thr = 0.5 * (lo + hi)
    if not lo <= thr < hi:
        thr = lo
    return int(features[j]), float(thr), float(cost[j, i])


def _n_candidates(max_features, d):
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(math.floor(math.sqrt(d))))
    if max_features == "log2":
        return max(1, int(math.floor(math.log2(d))))
    if isinstance(max_features, float):
        return max(1, min(d, int(max_features * d)))
    return max(1, min(d, int(max_features)))


def _grow_tree(X, y, n_classes, seed, tree_index, k, min_samples_leaf, max_depth, bootstrap):
    rng = np.random.default_rng(np.random.SeedSequence([seed, tree_index]))
    n, d = X.shape
    if bootstrap:
        w = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
    else:
        w = np.ones(n)
    n_total = w.sum()

    feature, threshold, left, right, value, decrease = [], [], [], [], [], []

    def new_node(rows):
        counts = np.bincount(y[rows], weights=w[rows], minlength=n_classes)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts)
        decrease.append(0.0)
        return len(feature) - 1, counts

    root_rows = np.flatnonzero(w > 0)
    root, root_counts = new_node(root_rows)
    stack = [(root, root_rows, root_counts, 0)]
    while stack:
        node, rows, counts, depth = stack.pop()
        n_node = counts.sum()
        if (
            np.count_nonzero(counts) < 2
            or n_node < 2 * min_samples_leaf
            or (max_depth is not None and depth >= max_depth)
        ):
            continue
        # draw order doubles as the tie-break; sorting here would bias
        # split counts towards low feature indexes
        features = rng.choice(d, size=k, replace=False)
        split = _best_split(X, rows, w, y, n_classes, features, min_samples_leaf)
        if split is None:
            continue
        f, thr, cost = split
        go_left = X[rows, f] <= thr
        l_rows, r_rows = rows[go_left], rows[~go_left]
        parent_cost = float(_gini_cost(counts, n_node))
        feature[node] = f
        threshold[node] = thr
        decrease[node] = (parent_cost - cost) / n_total
        l_node, l_counts = new_node(l_rows)
        r_node, r_counts = new_node(r_rows)
        left[node] = l_node
        right[node] = r_node
        # right pushed first so the left subtree is numbered first
        stack.append((r_node, r_rows, r_counts, depth + 1))
        stack.append((l_node, l_rows, l_counts, depth + 1))

    tree = Tree(
        feature=np.asarray(feature, dtype=np.intp),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.intp),
        right=np.asarray(right, dtype=np.intp),
        value=np.asarray(value, dtype=np.float64).reshape(-1, n_classes),
        impurity_decrease=np.asarray(decrease, dtype=np.float64),
    )
    return tree, w == 0


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged ensemble of Gini CART trees.

    Parameters
    ----------
    n_estimators : int, default=3000
        Number of trees.
    max_features : {"sqrt", "log2"}, int, float or None, default="sqrt"
        Candidate features examined at each split.
    min_samples_leaf : int, default=1
        Minimum (bootstrap-weighted) sample count in each child.
    max_depth : int or None, default=None
        Depth cap; ``None`` grows until leaves are pure.
    importance : {"split", "impurity"}, default="split"
        ``"split"`` scores a feature by how many split points use it,
        ``"impurity"`` by total weighted Gini decrease.
    oob_score : bool, default=False
        Keep out-of-bag posteriors in ``oob_decision_function_``.
    random_state : int, default=0
    n_jobs : int, default=1
        Trees grown in parallel (threads); results do not depend on it.
    """

    def __init__(
        self,
        n_estimators=3000,
        max_features="sqrt",
        min_samples_leaf=1,
        max_depth=None,
        importance="split",
        bootstrap=True,
        oob_score=False,
        random_state=0,
        n_jobs=1,
    ):
        self.n_estimators = n_estimators
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.max_depth = max_depth
        self.importance = importance
        self.bootstrap = bootstrap
        self.oob_score = oob_score
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _check_params(self):
        if int(self.n_estimators) < 1:
            raise ValueError("n_estimators must be >= 1")
        if int(self.min_samples_leaf) < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.importance not in ("split", "impurity"):
            raise ValueError(f"unknown importance mode {self.importance!r}")

    def fit(self, X, y):
        self._check_params()
        X = check_features(X)
        y = np.asarray(y)
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if X.shape[0] < 2:
            raise DataError("need at least two training samples")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise DataError(f"training labels hold a single class {self.classes_.tolist()}")
        self.n_features_in_ = X.shape[1]
        k = _n_candidates(self.max_features, X.shape[1])
        seed = int(self.random_state)
        args = (X, y_idx, self.classes_.size, seed)
        kw = dict(
            k=k,
            min_samples_leaf=int(self.min_samples_leaf),
            max_depth=self.max_depth,
            bootstrap=self.bootstrap,
        )
        if self.n_jobs in (None, 1):
            grown = [_grow_tree(*args, t, **kw) for t in range(int(self.n_estimators))]
        else:
            grown = Parallel(n_jobs=self.n_jobs, prefer="threads")(
                delayed(_grow_tree)(*args, t, **kw) for t in range(int(self.n_estimators))
            )
        self.trees_ = [tree for tree, _ in grown]
        if self.oob_score:
            self._set_oob(X, y_idx, [oob for _, oob in grown])
        return self

    def _set_oob(self, X, y_idx, oob_masks):
        proba = np.zeros((X.shape[0], self.classes_.size))
        hits = np.zeros(X.shape[0])
        for tree, mask in zip(self.trees_, oob_masks):
            if np.any(mask):
                proba[mask] += tree.predict_proba(X[mask])
                hits[mask] += 1
        seen = hits > 0
        proba[seen] /= hits[seen, None]
        proba[~seen] = np.nan
        self.oob_decision_function_ = proba
        pred = np.argmax(proba[seen], axis=1)
        self.oob_score_ = float(np.mean(pred == y_idx[seen])) if np.any(seen) else float("nan")

    def _check_fitted(self):
        if not hasattr(self, "trees_"):
            raise RuntimeError("RandomForest is not fitted yet")

    def predict_proba(self, X):
        """Average over trees of the leaf class frequencies."""
        self._check_fitted()
        X = check_features(X)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        proba = np.zeros((X.shape[0], self.classes_.size))
        for tree in self.trees_:
            proba += tree.predict_proba(X)
        proba /= len(self.trees_)
        return proba / proba.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    @property
    def split_counts_(self):
        self._check_fitted()
        counts = np.zeros(self.n_features_in_, dtype=np.int64)
        for tree in self.trees_:
            f = tree.feature[tree.feature >= 0]
            counts += np.bincount(f, minlength=self.n_features_in_)
        return counts

    @property
    def feature_importances_(self):
        self._check_fitted()
        if self.importance == "split":
            raw = self.split_counts_.astype(np.float64)
        else:
            raw = np.zeros(self.n_features_in_)
            for tree in self.trees_:
                inner = tree.feature >= 0
                np.add.at(raw, tree.feature[inner], tree.impurity_decrease[inner])
        total = raw.sum()
        if total <= 0:
            return np.full(self.n_features_in_, 1.0 / self.n_features_in_)
        return raw / total

    def to_dict(self):
        self._check_fitted()
        return {
            "format": "seizure_acs.forest",
            "version": FORMAT_VERSION,
            "params": {k: v for k, v in self.get_params().items() if k != "n_jobs"},
            "classes": self.classes_.tolist(),
            "n_features": int(self.n_features_in_),
            "trees": [tree.to_dict() for tree in self.trees_],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != "seizure_acs.forest" or d.get("version") != FORMAT_VERSION:
            raise DataError(f"unsupported model format {d.get('format')!r} v{d.get('version')}")
        model = cls(**d["params"])
        model.classes_ = np.asarray(d["classes"])
        model.n_features_in_ = int(d["n_features"])
        model.trees_ = [Tree.from_dict(t) for t in d["trees"]]
        return model

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, separators=(",", ":"))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def to_binary_labels(labels):
    """Map early_ictal and ictal to SEIZURE (1), interictal to NON_SEIZURE (0)."""
    labels = np.asarray(labels)
    unknown = set(np.unique(labels).tolist()) - {"early_ictal", "ictal", "interictal"}
    if unknown:
        raise DataError(f"unknown class labels {sorted(unknown)}")
    return np.where(labels == "interictal", NON_SEIZURE, SEIZURE)
