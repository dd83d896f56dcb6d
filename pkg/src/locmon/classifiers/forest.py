"""Bagged random forest over :class:`DecisionTreeClassifier`."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ParameterError
from .tree import (
    CRITERIA,
    DecisionTreeClassifier,
    check_classifier_input,
    check_predict_input,
    resolve_max_features,
)


def tree_seed(master_seed, index):
    """Seed sequence for tree ``index``; depends only on ``(master_seed, index)``."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


class RandomForestClassifier(ClassifierMixin, BaseEstimator):
    """Majority vote over trees grown on bootstrap samples with random feature subsets.

    ``max_features="sqrt"`` draws ``floor(sqrt(n_features))`` candidate
    features per node. Every tree's randomness comes from
    :func:`tree_seed`, so training order does not affect the result.
    """

    def __init__(self, n_estimators=100, criterion="gini", max_depth=12, min_samples_split=2,
                 max_features="sqrt", bootstrap=True, random_state=None):
        self.n_estimators = n_estimators
        self.criterion = criterion
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y):
        if self.n_estimators < 1:
            raise ParameterError("n_estimators must be >= 1")
        if self.criterion not in CRITERIA:
            raise ParameterError(f"criterion must be one of {CRITERIA}")
        X, y_enc, classes = check_classifier_input(X, y)
        n, n_features = X.shape
        mf = resolve_max_features(self.max_features, n_features)

        master = self.random_state
        if master is None:
            master = np.random.SeedSequence().entropy
        self.master_seed_ = master
        self.classes_ = classes
        self.n_classes_ = len(classes)
        self.n_features_in_ = n_features
        self.max_features_ = mf

        trees = []
        for i in range(self.n_estimators):
            rng = np.random.default_rng(tree_seed(master, i))
            rows = rng.integers(0, n, n) if self.bootstrap else np.arange(n)
            tree = DecisionTreeClassifier(
                criterion=self.criterion, max_depth=self.max_depth,
                min_samples_split=self.min_samples_split, max_features=mf,
            )
            tree._fit_encoded(X[rows], y_enc[rows], classes, rng)
            trees.append(tree)
        self.estimators_ = trees
        return self

    def _votes(self, X):
        votes = np.zeros((X.shape[0], self.n_classes_), dtype=int)
        rows = np.arange(X.shape[0])
        for tree in self.estimators_:
            np.add.at(votes, (rows, tree._predict_encoded(X)), 1)
        return votes

    def predict(self, X):
        check_is_fitted(self, "estimators_")
        X = check_predict_input(self, X)
        return self.classes_[np.argmax(self._votes(X), axis=1)]

    def predict_proba(self, X):
        check_is_fitted(self, "estimators_")
        X = check_predict_input(self, X)
        return self._votes(X) / len(self.estimators_)

    @property
    def feature_importances_(self):
        check_is_fitted(self, "estimators_")
        scores = np.mean([t.feature_importances_ for t in self.estimators_], axis=0)
        total = scores.sum()
        return scores / total if total > 0 else scores
