"""CART-style decision tree classifier.

Splits are searched on midpoints between consecutive distinct sorted values
and scored by weighted impurity decrease (gini or entropy). Ties between
candidate splits go to the lower feature index, then the lower threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import InputError, ParameterError, ShapeError

CRITERIA = ("gini", "entropy")

# gains closer than this are treated as tied
TIE_TOL = 1e-12


def node_impurity(counts, criterion="gini"):
    """Impurity of one class-count vector."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    if criterion == "gini":
        return float(1.0 - np.sum(p * p))
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _impurity_rows(counts, n, criterion):
    # counts: (rows, K); n: (rows,) all > 0
    p = counts / n[:, None]
    if criterion == "gini":
        return 1.0 - np.sum(p * p, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -np.sum(p * logs, axis=1)


def best_split_for_feature(col, y_enc, n_classes, criterion, parent_impurity):
    """Best ``(gain, threshold)`` on one feature, or ``None`` if the column is constant.

    ``gain`` is the unweighted impurity decrease
    ``parent - n_l/n * imp_l - n_r/n * imp_r``.
    """
    n = col.shape[0]
    order = np.argsort(col, kind="stable")
    sv = col[order]
    valid = np.flatnonzero(sv[:-1] != sv[1:])
    if valid.size == 0:
        return None
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_enc[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[valid]
    right = onehot.sum(axis=0) - left
    n_left = (valid + 1).astype(float)
    n_right = n - n_left
    child = (n_left / n) * _impurity_rows(left, n_left, criterion) \
        + (n_right / n) * _impurity_rows(right, n_right, criterion)
    gains = parent_impurity - child
    best = gains.max()
    i = int(np.flatnonzero(gains >= best - TIE_TOL)[0])
    pos = valid[i]
    lo, hi = sv[pos], sv[pos + 1]
    threshold = lo / 2.0 + hi / 2.0
    if threshold >= hi:
        threshold = lo
    return float(gains[i]), float(threshold)


@dataclass
class TreeStructure:
    """Flat node arrays; ``feature[i] == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_samples: np.ndarray
    value: np.ndarray  # (nodes, n_classes) training class counts
    impurity: np.ndarray
    weighted_decrease: np.ndarray  # n_node/N * (impurity - weighted child impurity)

    @property
    def node_count(self):
        return self.feature.shape[0]

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def depth(self):
        depths = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.node_count else 0

    def apply(self, X):
        """Leaf index reached by every row."""
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = X[idx, self.feature[cur]] <= self.threshold[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node


def build_tree(X, y_enc, n_classes, criterion="gini", max_depth=None, min_samples_split=2,
               max_features=None, rng=None):
    """Grow a tree on encoded labels ``y_enc`` in ``[0, n_classes)``.

    With ``max_features`` below the column count, each node draws a random
    feature permutation and evaluates its first ``max_features`` entries; if
    none of them gives a positive decrease the remaining features are tried
    one at a time in permutation order.
    """
    n_total, n_features = X.shape
    feature, threshold, left, right = [], [], [], []
    n_samples, value, impurity, decrease = [], [], [], []

    def new_node(rows):
        counts = np.bincount(y_enc[rows], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        n_samples.append(rows.size)
        value.append(counts)
        impurity.append(node_impurity(counts, criterion))
        decrease.append(0.0)
        return len(feature) - 1

    def search(rows, candidates, parent_imp):
        best = None  # (gain, feature, threshold)
        for f in candidates:
            found = best_split_for_feature(X[rows, f], y_enc[rows], n_classes, criterion, parent_imp)
            if found is None:
                continue
            gain, thr = found
            if best is None or gain > best[0] + TIE_TOL:
                best = (gain, f, thr)
        return best

    root = new_node(np.arange(n_total))
    stack = [(root, np.arange(n_total), 0)]
    while stack:
        node, rows, depth = stack.pop()
        imp = impurity[node]
        if (imp <= 0.0 or rows.size < min_samples_split
                or (max_depth is not None and depth >= max_depth)):
            continue

        if max_features is None or max_features >= n_features:
            best = search(rows, range(n_features), imp)
        else:
            perm = rng.permutation(n_features)
            best = search(rows, sorted(perm[:max_features]), imp)
            if best is None or best[0] <= TIE_TOL:
                for f in perm[max_features:]:
                    best = search(rows, [f], imp)
                    if best is not None and best[0] > TIE_TOL:
                        break

        if best is None or best[0] <= TIE_TOL:
            continue
        gain, f, thr = best
        mask = X[rows, f] <= thr
        l_rows, r_rows = rows[mask], rows[~mask]
        feature[node] = int(f)
        threshold[node] = thr
        decrease[node] = rows.size / n_total * gain
        l_id = new_node(l_rows)
        r_id = new_node(r_rows)
        left[node], right[node] = l_id, r_id
        # right pushed first so the left subtree is numbered first
        stack.append((r_id, r_rows, depth + 1))
        stack.append((l_id, l_rows, depth + 1))

    return TreeStructure(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        n_samples=np.array(n_samples, dtype=int),
        value=np.array(value, dtype=float).reshape(-1, n_classes),
        impurity=np.array(impurity, dtype=float),
        weighted_decrease=np.array(decrease, dtype=float),
    )


def tree_importances(tree: TreeStructure, n_features):
    """Normalized mean-decrease-in-impurity; all zeros for a single-leaf tree."""
    scores = np.zeros(n_features)
    internal = tree.feature >= 0
    np.add.at(scores, tree.feature[internal], tree.weighted_decrease[internal])
    total = scores.sum()
    if total > 0:
        scores /= total
    return scores


def resolve_max_features(max_features, n_features):
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, int(np.floor(np.sqrt(n_features))))
    if max_features == "log2":
        return max(1, int(np.floor(np.log2(n_features))))
    if isinstance(max_features, float) and 0 < max_features <= 1:
        return max(1, int(max_features * n_features))
    m = int(max_features)
    if m < 1 or m > n_features:
        raise ParameterError(f"max_features={max_features} outside [1, {n_features}]")
    return m


def check_classifier_input(X, y):
    try:
        X, y = check_X_y(X, y, dtype=float)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    classes, y_enc = np.unique(y, return_inverse=True)
    return X, y_enc, classes


def check_predict_input(estimator, X):
    try:
        X = check_array(X, dtype=float)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if X.shape[1] != estimator.n_features_in_:
        raise ShapeError(f"model expects {estimator.n_features_in_} columns, got {X.shape[1]}")
    return X


class DecisionTreeClassifier(ClassifierMixin, BaseEstimator):
    """Greedy binary classification tree.

    Parameters
    ----------
    criterion : {"gini", "entropy"}
    max_depth : int or None
        Depth limit; ``None`` grows until leaves are pure.
    min_samples_split : int
        Nodes with fewer rows become leaves.
    max_features : int, float, "sqrt", "log2" or None
        Features considered per node; ``None`` means all of them.
    random_state : int or None
        Only used when ``max_features`` restricts the search.
    """

    def __init__(self, criterion="gini", max_depth=12, min_samples_split=2,
                 max_features=None, random_state=None):
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def _check_params(self):
        if self.criterion not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ParameterError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ParameterError("min_samples_split must be >= 2")

    def fit(self, X, y):
        self._check_params()
        X, y_enc, classes = check_classifier_input(X, y)
        rng = np.random.default_rng(self.random_state)
        self._fit_encoded(X, y_enc, classes, rng)
        return self

    def _fit_encoded(self, X, y_enc, classes, rng):
        self.classes_ = classes
        self.n_classes_ = len(classes)
        self.n_features_in_ = X.shape[1]
        self.max_features_ = resolve_max_features(self.max_features, X.shape[1])
        self.tree_ = build_tree(
            X, y_enc, self.n_classes_, criterion=self.criterion, max_depth=self.max_depth,
            min_samples_split=self.min_samples_split, max_features=self.max_features_, rng=rng,
        )
        return self

    def _predict_encoded(self, X):
        leaves = self.tree_.apply(X)
        return np.argmax(self.tree_.value[leaves], axis=1)

    def predict(self, X):
        check_is_fitted(self, "tree_")
        X = check_predict_input(self, X)
        return self.classes_[self._predict_encoded(X)]

    def predict_proba(self, X):
        check_is_fitted(self, "tree_")
        X = check_predict_input(self, X)
        counts = self.tree_.value[self.tree_.apply(X)]
        return counts / counts.sum(axis=1, keepdims=True)

    @property
    def feature_importances_(self):
        check_is_fitted(self, "tree_")
        return tree_importances(self.tree_, self.n_features_in_)

    def get_depth(self):
        check_is_fitted(self, "tree_")
        return self.tree_.depth()

    def get_n_leaves(self):
        check_is_fitted(self, "tree_")
        return self.tree_.n_leaves
