import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ParameterError
from .tree import check_classifier_input, check_predict_input


class OneVsRestLogisticRegression(ClassifierMixin, BaseEstimator):
    """One binary logistic scorer per class, trained by full-batch gradient descent.

    Each scorer minimizes mean binary cross-entropy of "this class vs the
    rest" and stops after ``max_iter`` steps or once the infinity norm of
    its gradient (weights and bias) drops below ``tol``. Prediction is the
    argmax of the per-class probabilities.
    """

    def __init__(self, learning_rate=0.1, max_iter=2000, tol=1e-6):
        self.learning_rate = learning_rate
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y_enc, classes = check_classifier_input(X, y)
        if len(classes) < 2:
            raise ParameterError("logistic regression needs at least two classes")
        if self.max_iter < 0:
            raise ParameterError("max_iter must be >= 0")
        n, d = X.shape
        k = len(classes)
        self.coef_ = np.zeros((k, d))
        self.intercept_ = np.zeros(k)
        self.n_iter_ = np.zeros(k, dtype=int)
        for c in range(k):
            target = (y_enc == c).astype(float)
            w = np.zeros(d)
            b = 0.0
            it = 0
            for it in range(self.max_iter):
                err = expit(X @ w + b) - target
                grad_w = X.T @ err / n
                grad_b = err.mean()
                if max(np.max(np.abs(grad_w), initial=0.0), abs(grad_b)) < self.tol:
                    break
                w -= self.learning_rate * grad_w
                b -= self.learning_rate * grad_b
            else:
                it = self.max_iter
            self.coef_[c], self.intercept_[c], self.n_iter_[c] = w, b, it
        self.classes_ = classes
        self.n_features_in_ = d
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = check_predict_input(self, X)
        return X @ self.coef_.T + self.intercept_

    def predict_proba(self, X):
        """Per-class one-vs-rest probabilities (rows are not renormalized)."""
        return expit(self.decision_function(X))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]
