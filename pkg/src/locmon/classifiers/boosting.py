"""One-vs-rest gradient boosting with shallow regression trees."""

import numpy as np
from scipy.special import expit, logit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ParameterError
from .tree import TIE_TOL, TreeStructure, check_classifier_input, check_predict_input


def _best_sse_split(col, r):
    n = col.shape[0]
    order = np.argsort(col, kind="stable")
    sv, sr = col[order], r[order]
    valid = np.flatnonzero(sv[:-1] != sv[1:])
    if valid.size == 0:
        return None
    cs = np.cumsum(sr)[valid]
    cs2 = np.cumsum(sr * sr)[valid]
    tot, tot2 = sr.sum(), (sr * sr).sum()
    n_l = valid + 1.0
    n_r = n - n_l
    sse = (cs2 - cs * cs / n_l) + ((tot2 - cs2) - (tot - cs) ** 2 / n_r)
    parent = tot2 - tot * tot / n
    gains = (parent - sse) / n
    best = gains.max()
    i = int(np.flatnonzero(gains >= best - TIE_TOL)[0])
    lo, hi = sv[valid[i]], sv[valid[i] + 1]
    thr = lo / 2.0 + hi / 2.0
    if thr >= hi:
        thr = lo
    return float(gains[i]), float(thr)


def build_regression_tree(X, residual, hessian, max_depth):
    """Squared-error tree on ``residual``; leaves hold the Newton step
    ``sum(residual) / sum(hessian)`` for the rows they receive."""
    n_total, n_features = X.shape
    feature, threshold, left, right, n_samples, value = [], [], [], [], [], []

    def leaf_value(rows):
        den = hessian[rows].sum()
        return residual[rows].sum() / den if den > 1e-150 else 0.0

    def new_node(rows):
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        n_samples.append(rows.size)
        value.append(leaf_value(rows))
        return len(feature) - 1

    root = new_node(np.arange(n_total))
    stack = [(root, np.arange(n_total), 0)]
    while stack:
        node, rows, depth = stack.pop()
        if depth >= max_depth or rows.size < 2:
            continue
        best = None
        for f in range(n_features):
            found = _best_sse_split(X[rows, f], residual[rows])
            if found is not None and (best is None or found[0] > best[0] + TIE_TOL):
                best = (found[0], f, found[1])
        if best is None or best[0] <= TIE_TOL:
            continue
        _, f, thr = best
        mask = X[rows, f] <= thr
        feature[node], threshold[node] = f, thr
        l_id, r_id = new_node(rows[mask]), new_node(rows[~mask])
        left[node], right[node] = l_id, r_id
        stack.append((r_id, rows[~mask], depth + 1))
        stack.append((l_id, rows[mask], depth + 1))

    count = len(feature)
    return TreeStructure(
        feature=np.array(feature, dtype=int),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=int),
        right=np.array(right, dtype=int),
        n_samples=np.array(n_samples, dtype=int),
        value=np.array(value, dtype=float).reshape(count, 1),
        impurity=np.zeros(count),
        weighted_decrease=np.zeros(count),
    )


class GradientBoostingClassifier(ClassifierMixin, BaseEstimator):
    """Per class, an additive logistic model ``F_k = F_k0 + rate * sum(tree_s)``.

    Stage ``s`` fits a depth-limited regression tree to the negative
    gradient ``y_k - sigmoid(F_k)`` of the logistic loss on the class
    indicator. Prediction is the argmax over classes of ``F_k``.
    """

    def __init__(self, n_estimators=100, learning_rate=0.1, max_depth=3):
        self.n_estimators = n_estimators
        self.learning_rate = learning_rate
        self.max_depth = max_depth

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ParameterError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ParameterError("max_depth must be >= 1")
        X, y_enc, classes = check_classifier_input(X, y)
        k = len(classes)
        if k < 2:
            raise ParameterError("gradient boosting needs at least two classes")
        n = X.shape[0]
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.init_scores_ = np.zeros(k)
        self.estimators_ = []
        for c in range(k):
            target = (y_enc == c).astype(float)
            prior = np.clip(target.mean(), 1e-12, 1 - 1e-12)
            self.init_scores_[c] = logit(prior)
            score = np.full(n, self.init_scores_[c])
            stages = []
            for _ in range(self.n_estimators):
                p = expit(score)
                tree = build_regression_tree(X, target - p, p * (1.0 - p), self.max_depth)
                score += self.learning_rate * tree.value[tree.apply(X), 0]
                stages.append(tree)
            self.estimators_.append(stages)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "estimators_")
        X = check_predict_input(self, X)
        scores = np.tile(self.init_scores_, (X.shape[0], 1))
        for c, stages in enumerate(self.estimators_):
            for tree in stages:
                scores[:, c] += self.learning_rate * tree.value[tree.apply(X), 0]
        return scores

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
