import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..errors import ParameterError
from .tree import check_classifier_input, check_predict_input


class GaussianNB(ClassifierMixin, BaseEstimator):
    """Gaussian naive Bayes with per-class, per-feature mean and variance.

    Every variance is the population variance plus a smoothing term
    ``epsilon_``. When ``epsilon`` is not given it is ``var_smoothing``
    times the largest feature variance of the training matrix.
    """

    def __init__(self, var_smoothing=1e-9, epsilon=None):
        self.var_smoothing = var_smoothing
        self.epsilon = epsilon

    def fit(self, X, y):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        X, y_enc, classes = check_classifier_input(X, y)
        if self.epsilon is not None:
            eps = float(self.epsilon)
        else:
            eps = self.var_smoothing * float(np.max(X.var(axis=0)))
            if not eps > 0:
                # every column constant
                eps = self.var_smoothing
        k = len(classes)
        counts = np.bincount(y_enc, minlength=k)
        self.classes_ = classes
        self.n_features_in_ = X.shape[1]
        self.epsilon_ = eps
        self.class_count_ = counts.astype(float)
        self.class_prior_ = counts / counts.sum()
        self.theta_ = np.array([X[y_enc == c].mean(axis=0) for c in range(k)])
        self.var_ = np.array([X[y_enc == c].var(axis=0) for c in range(k)]) + eps
        return self

    def joint_log_likelihood(self, X):
        check_is_fitted(self, "theta_")
        X = check_predict_input(self, X)
        jll = []
        for c in range(len(self.classes_)):
            log_norm = -0.5 * np.sum(np.log(2.0 * np.pi * self.var_[c]))
            quad = -0.5 * np.sum((X - self.theta_[c]) ** 2 / self.var_[c], axis=1)
            jll.append(np.log(self.class_prior_[c]) + log_norm + quad)
        return np.array(jll).T

    def predict(self, X):
        return self.classes_[np.argmax(self.joint_log_likelihood(X), axis=1)]

    def predict_proba(self, X):
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)
