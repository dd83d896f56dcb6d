"""The six person classifiers behind one fit/predict contract.

Each estimator follows the scikit-learn API (``fit``, ``predict``,
``get_params``) and can be used in sklearn pipelines and ``clone``. The
``fit_*`` helpers train directly on a :class:`~locmon.dataset.Dataset`.
"""

import pickle

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .. import __version__
from ..errors import InputError, ParameterError, UnsupportedModelError
from .boosting import GradientBoostingClassifier
from .forest import RandomForestClassifier
from .knn import KNeighborsClassifier
from .logistic import OneVsRestLogisticRegression
from .naive_bayes import GaussianNB
from .tree import DecisionTreeClassifier

__all__ = [
    "CLASSIFIERS",
    "DecisionTreeClassifier",
    "GaussianNB",
    "GradientBoostingClassifier",
    "KNeighborsClassifier",
    "OneVsRestLogisticRegression",
    "RandomForestClassifier",
    "feature_importances",
    "fit_decision_tree",
    "fit_gaussian_nb",
    "fit_gradient_boost",
    "fit_knn",
    "fit_logreg_ovr",
    "fit_random_forest",
    "load_model",
    "make_classifier",
    "model_summary",
    "predict",
    "save_model",
]

CLASSIFIERS = {
    "dt": DecisionTreeClassifier,
    "rf": RandomForestClassifier,
    "gb": GradientBoostingClassifier,
    "knn": KNeighborsClassifier,
    "nb": GaussianNB,
    "lr": OneVsRestLogisticRegression,
}

# classifiers that take a seed
SEEDED = {"dt", "rf"}

MODEL_FORMAT_VERSION = 1


def make_classifier(name, seed=None, **params):
    """Build an unfitted classifier by short name (``dt``, ``rf``, ``gb``, ``knn``, ``nb``, ``lr``)."""
    try:
        cls = CLASSIFIERS[name]
    except KeyError:
        raise ParameterError(
            f"unknown classifier {name!r}; choose from {', '.join(CLASSIFIERS)}"
        ) from None
    if name in SEEDED and seed is not None:
        params.setdefault("random_state", seed)
    try:
        return cls(**params)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {name}: {exc}") from None


def fit_decision_tree(data, **params):
    return DecisionTreeClassifier(**params).fit(data.features, data.labels)


def fit_random_forest(data, **params):
    return RandomForestClassifier(**params).fit(data.features, data.labels)


def fit_gaussian_nb(data, epsilon=None, **params):
    return GaussianNB(epsilon=epsilon, **params).fit(data.features, data.labels)


def fit_knn(data, k=5):
    return KNeighborsClassifier(n_neighbors=k).fit(data.features, data.labels)


def fit_logreg_ovr(data, **params):
    return OneVsRestLogisticRegression(**params).fit(data.features, data.labels)


def fit_gradient_boost(data, **params):
    return GradientBoostingClassifier(**params).fit(data.features, data.labels)


def predict(model, rows):
    return model.predict(np.asarray(rows, dtype=float))


def feature_importances(model):
    """Normalized impurity importances of a tree or forest."""
    if not isinstance(model, (DecisionTreeClassifier, RandomForestClassifier)):
        raise UnsupportedModelError(
            f"{type(model).__name__} has no impurity-based feature importances"
        )
    return model.feature_importances_


def model_summary(model, feature_names=None):
    """Plain-dict description of a fitted model for reports."""
    check_is_fitted(model)
    summary = {
        "model": type(model).__name__,
        "params": model.get_params(),
        "n_features": int(model.n_features_in_),
        "classes": [int(c) if isinstance(c, np.integer) else c for c in model.classes_],
    }
    if isinstance(model, DecisionTreeClassifier):
        summary.update(node_count=model.tree_.node_count, depth=model.get_depth(),
                       n_leaves=model.get_n_leaves())
    elif isinstance(model, RandomForestClassifier):
        summary.update(
            n_trees=len(model.estimators_),
            node_counts=[t.tree_.node_count for t in model.estimators_],
            depths=[t.get_depth() for t in model.estimators_],
        )
    if isinstance(model, (DecisionTreeClassifier, RandomForestClassifier)):
        names = feature_names or [f"x{i}" for i in range(model.n_features_in_)]
        summary["importances"] = dict(zip(names, map(float, model.feature_importances_)))
    return summary


def save_model(model, path):
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "toolkit_version": __version__,
        "model_class": type(model).__name__,
        "model": model,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_model(path):
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise InputError(f"{path}: unsupported model file format")
    return payload["model"]
