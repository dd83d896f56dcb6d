import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ParameterError
from .tree import check_classifier_input, check_predict_input

_CHUNK = 512


class KNeighborsClassifier(ClassifierMixin, BaseEstimator):
    """Euclidean k-nearest-neighbour majority vote.

    Equal distances are resolved by training-row order and tied votes by
    the lowest class code.
    """

    def __init__(self, n_neighbors=5):
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y_enc, classes = check_classifier_input(X, y)
        if self.n_neighbors < 1:
            raise ParameterError("n_neighbors must be >= 1")
        if self.n_neighbors > X.shape[0]:
            raise ParameterError(f"n_neighbors={self.n_neighbors} exceeds {X.shape[0]} training rows")
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self._fit_X = X.copy()
        self._y = y_enc
        return self

    def kneighbors(self, X):
        """Indices of the k nearest training rows, nearest first."""
        check_is_fitted(self, "_fit_X")
        X = check_predict_input(self, X)
        out = np.empty((X.shape[0], self.n_neighbors), dtype=int)
        for start in range(0, X.shape[0], _CHUNK):
            block = X[start:start + _CHUNK]
            d2 = ((block[:, None, :] - self._fit_X[None, :, :]) ** 2).sum(axis=2)
            out[start:start + _CHUNK] = np.argsort(d2, axis=1, kind="stable")[:, :self.n_neighbors]
        return out

    def predict(self, X):
        neighbors = self.kneighbors(X)
        labels = self._y[neighbors]
        k = len(self.classes_)
        votes = np.zeros((labels.shape[0], k), dtype=int)
        for j in range(labels.shape[1]):
            np.add.at(votes, (np.arange(labels.shape[0]), labels[:, j]), 1)
        return self.classes_[np.argmax(votes, axis=1)]
