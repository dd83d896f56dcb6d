"""Confusion-matrix metrics, stratified k-fold cross-validation and holdout splits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import clone

from .dataset import Dataset, apply_minmax, fit_minmax
from .errors import InputError, ParameterError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are actual classes, columns predicted classes."""

    counts: np.ndarray
    class_names: tuple = ()

    @property
    def k(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def tp(self):
        return np.diag(self.counts).copy()

    @property
    def fp(self):
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self):
        return self.counts.sum(axis=1) - self.tp


def confusion_matrix(actual, predicted, k, class_names=()):
    actual = np.asarray(actual, dtype=int).ravel()
    predicted = np.asarray(predicted, dtype=int).ravel()
    if actual.shape != predicted.shape:
        raise ShapeError(f"{actual.size} actual labels but {predicted.size} predictions")
    if k < 1:
        raise ParameterError("class count must be >= 1")
    for codes in (actual, predicted):
        if codes.size and (codes.min() < 0 or codes.max() >= k):
            raise InputError(f"label code outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (actual, predicted), 1)
    return ConfusionMatrix(counts, tuple(class_names))


def _ratio(num, den):
    return num / den if den else 0.0


def _harmonic(a, b):
    return 2.0 * a * b / (a + b) if a + b > 0 else 0.0


@dataclass
class MetricsReport:
    accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    macro_f1_per_class_mean: float
    per_class: list
    support: list
    zero_division: bool = False
    class_names: tuple = ()

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "macro_f1_per_class_mean": self.macro_f1_per_class_mean,
            "per_class": self.per_class,
            "support": self.support,
            "zero_division": self.zero_division,
        }


def metrics_report(cm: ConfusionMatrix):
    """Accuracy with micro and macro precision, recall and F1.

    Micro scores pool TP/FP/FN over classes. Macro precision and recall are
    unweighted class means; ``macro_f1`` is their harmonic mean, and
    ``macro_f1_per_class_mean`` the mean of per-class F1 scores. Any 0/0
    ratio is 0 and sets ``zero_division``.
    """
    tp, fp, fn = cm.tp, cm.fp, cm.fn
    n = cm.total
    tp_sum, fp_sum, fn_sum = int(tp.sum()), int(fp.sum()), int(fn.sum())

    zero_div = False
    per_class = []
    precisions, recalls, f1s = [], [], []
    for i in range(cm.k):
        t, p_den, r_den = int(tp[i]), int(tp[i] + fp[i]), int(tp[i] + fn[i])
        zero_div |= p_den == 0 or r_den == 0
        prec, rec = _ratio(t, p_den), _ratio(t, r_den)
        f1 = _ratio(2 * t, 2 * t + int(fp[i]) + int(fn[i]))
        precisions.append(prec)
        recalls.append(rec)
        f1s.append(f1)
        entry = {"class": i, "precision": prec, "recall": rec, "f1": f1}
        if cm.class_names:
            entry["name"] = cm.class_names[i]
        per_class.append(entry)

    zero_div |= n == 0
    macro_p = math.fsum(precisions) / cm.k
    macro_r = math.fsum(recalls) / cm.k
    return MetricsReport(
        accuracy=_ratio(tp_sum, n),
        micro_precision=_ratio(tp_sum, tp_sum + fp_sum),
        micro_recall=_ratio(tp_sum, tp_sum + fn_sum),
        # integer form keeps micro F1 bit-identical to accuracy
        micro_f1=_ratio(2 * tp_sum, 2 * tp_sum + fp_sum + fn_sum),
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=_harmonic(macro_p, macro_r),
        macro_f1_per_class_mean=math.fsum(f1s) / cm.k,
        per_class=per_class,
        support=[int(s) for s in cm.counts.sum(axis=1)],
        zero_division=bool(zero_div),
        class_names=cm.class_names,
    )


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FoldAssignment:
    folds: np.ndarray
    k: int
    seed: int | None = None

    def test_indices(self, f):
        return np.flatnonzero(self.folds == f)

    def train_indices(self, f):
        return np.flatnonzero(self.folds != f)

    def splits(self):
        for f in range(self.k):
            yield self.train_indices(f), self.test_indices(f)


def stratified_kfold(labels, k=5, seed=None):
    """Shuffle each class's indices with ``seed`` and deal them round-robin to folds.

    The dealing position carries over from one class to the next, so fold
    sizes differ by at most one overall as well as per class.
    """
    labels = np.asarray(labels).ravel()
    n = labels.size
    if k < 2:
        raise ParameterError("need at least 2 folds")
    if k > n:
        raise ParameterError(f"{k} folds requested for {n} samples")
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=int)
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        folds[idx] = (offset + np.arange(idx.size)) % k
        offset = (offset + idx.size) % k
    return FoldAssignment(folds, k, seed)


class StratifiedKFold:
    """scikit-learn compatible splitter built on :func:`stratified_kfold`."""

    def __init__(self, n_splits=5, random_state=None):
        self.n_splits = n_splits
        self.random_state = random_state

    def get_n_splits(self, X=None, y=None, groups=None):
        return self.n_splits

    def split(self, X, y, groups=None):
        yield from stratified_kfold(y, self.n_splits, self.random_state).splits()


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def holdout_split(data: Dataset, test_fraction=0.2, seed=None, stratified=True):
    """Row-disjoint train/test split.

    Stratified mode rounds ``n_c * test_fraction`` per class; classes with a
    single sample stay in the training set (with a warning).
    """
    if not 0 < test_fraction < 1:
        raise ParameterError("test_fraction must lie in (0, 1)")
    n = data.n_rows
    rng = np.random.default_rng(seed)
    if stratified:
        test = []
        for c in np.unique(data.labels):
            idx = rng.permutation(np.flatnonzero(data.labels == c))
            if idx.size == 1:
                name = data.label_names[c] if c < len(data.label_names) else c
                logger.warning("class %r has a single sample; kept in the training split", name)
                continue
            test.extend(idx[:_round_half_up(idx.size * test_fraction)])
        test = np.array(sorted(test), dtype=int)
    else:
        n_test = min(max(_round_half_up(n * test_fraction), 1), n - 1)
        test = np.sort(rng.permutation(n)[:n_test])
    mask = np.zeros(n, dtype=bool)
    mask[test] = True
    return data.subset(np.flatnonzero(~mask)), data.subset(test)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass
class CrossValResult:
    fold_reports: list
    mean: dict = field(default_factory=dict)
    std: dict = field(default_factory=dict)
    scalers: list = field(default_factory=list)  # per-fold ScalerParams when scaling

    def to_dict(self):
        d = {
            "folds": [r.to_dict() for r in self.fold_reports],
            "mean": self.mean,
            "std": self.std,
        }
        if self.scalers:
            d["scalers"] = [p.to_dict() for p in self.scalers]
        return d


AGGREGATED = ("accuracy", "macro_precision", "macro_recall", "macro_f1", "macro_f1_per_class_mean")


def _fit(trainer, X, y):
    if hasattr(trainer, "fit"):
        return clone(trainer).fit(X, y)
    return trainer(X, y)


def cross_validate(trainer, data: Dataset, folds: FoldAssignment, scale=False):
    """Train on every fold's complement and score on the fold.

    ``trainer`` is either an unfitted estimator (cloned per fold) or a
    callable ``trainer(X, y) -> fitted model``. With ``scale`` a min-max
    scaler is fitted on each training portion only.
    """
    if folds.folds.shape[0] != data.n_rows:
        raise ShapeError("fold assignment does not match the dataset")
    k_classes = len(data.label_names)
    present = np.unique(data.labels)
    reports, scalers = [], []
    for f, (train, test) in enumerate(folds.splits()):
        missing = np.setdiff1d(present, data.labels[train])
        if missing.size:
            name = data.label_names[missing[0]]
            raise InputError(f"fold {f}: class {name!r} absent from the training portion")
        X_train, X_test = data.features[train], data.features[test]
        if scale:
            params = fit_minmax(X_train)
            scalers.append(params)
            X_train, X_test = apply_minmax(params, X_train), apply_minmax(params, X_test)
        model = _fit(trainer, X_train, data.labels[train])
        pred = np.asarray(model.predict(X_test), dtype=int)
        cm = confusion_matrix(data.labels[test], pred, k_classes, data.label_names)
        reports.append(metrics_report(cm))

    mean, std = {}, {}
    for key in AGGREGATED:
        values = np.array([getattr(r, key) for r in reports])
        mean[key] = float(values.mean())
        std[key] = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return CrossValResult(reports, mean, std, scalers)
