"""Vector autoregression and its diagnostics.

Least-squares VAR(p) fitting, one-step and recursive forecasting, AIC lag
selection, augmented Dickey-Fuller unit-root tests and bivariate Granger
causality F-tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import betainc

from .errors import (
    DegenerateFitError,
    InputError,
    InsufficientDataError,
    ParameterError,
    RankDeficientError,
    ShapeError,
)

SERIES_NAMES = ("Temp", "Hum", "LDR", "Gas")
# Dickey-Fuller asymptotic critical values, constant-only regression
ADF_CRITICAL_VALUES = {"1%": -3.43, "5%": -2.86, "10%": -2.57}
FORECAST_MODES = ("one_step_with_actuals", "recursive")

_RANK_TOL = 1e-10


@dataclass
class TimeSeriesFrame:
    """``T x m`` observations ordered by time, one named column per series."""

    values: np.ndarray
    names: tuple = SERIES_NAMES
    interval: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        self.names = tuple(self.names)
        T, m = self.values.shape
        if T < 1 or m < 1:
            raise ShapeError("a time series frame needs at least one row and one column")
        if len(self.names) != m:
            raise ShapeError(f"{m} columns but {len(self.names)} names")
        if len(set(self.names)) != m:
            raise InputError("series names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise InputError("time series contains missing or non-finite values")

    @property
    def n_obs(self):
        return self.values.shape[0]

    @property
    def n_series(self):
        return self.values.shape[1]

    def column(self, name):
        try:
            return self.values[:, self.names.index(name)]
        except ValueError:
            raise InputError(f"unknown series {name!r}; have {', '.join(self.names)}") from None

    def difference(self):
        """First differences (one row shorter)."""
        return TimeSeriesFrame(np.diff(self.values, axis=0), self.names, self.interval)

    @classmethod
    def from_records(cls, records, names=SERIES_NAMES):
        from .dataset import NUMERIC_COLUMNS

        values = []
        for i, r in enumerate(records):
            row = [r.value(n) for n in names if n in NUMERIC_COLUMNS]
            if len(row) != len(names):
                raise InputError(f"unknown sensor column among {names}")
            if any(v is None for v in row):
                raise InputError(f"record {i + 1} has a missing sensor value")
            values.append(row)
        if not values:
            raise InputError("no records")
        interval = None
        if len(records) > 1:
            gaps = np.diff([r.timestamp.timestamp() for r in records])
            interval = float(np.median(gaps))
        return cls(np.array(values), names, interval)


def chrono_split(frame: TimeSeriesFrame, n_test):
    """Last ``n_test`` rows as the test frame, no shuffling."""
    if not 1 <= n_test < frame.n_obs:
        raise ParameterError(f"n_test must lie in [1, {frame.n_obs - 1}], got {n_test}")
    cut = frame.n_obs - n_test
    return (TimeSeriesFrame(frame.values[:cut], frame.names, frame.interval),
            TimeSeriesFrame(frame.values[cut:], frame.names, frame.interval))


def rmse(actual, predicted):
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ShapeError(f"length mismatch: {a.size} vs {p.size}")
    if a.size == 0:
        raise InputError("rmse of empty vectors")
    return float(np.sqrt(np.mean((a - p) ** 2)))


# ---------------------------------------------------------------------------
# least squares helpers
# ---------------------------------------------------------------------------

def _lag_design(Y, p, start=None):
    """Design ``[1, Y_{t-1}, ..., Y_{t-p}]`` and targets ``Y_t`` for ``t >= start``."""
    start = p if start is None else start
    T = Y.shape[0]
    cols = [np.ones(T - start)]
    for lag in range(1, p + 1):
        cols.append(Y[start - lag:T - lag])
    return np.column_stack(cols), Y[start:]


def _qr_solve(Z, Y, column_names):
    Q, R = np.linalg.qr(Z)
    norms = np.linalg.norm(Z, axis=0)
    weak = np.abs(np.diag(R)) <= _RANK_TOL * np.where(norms > 0, norms, 1.0)
    if np.any(weak):
        bad = [column_names[j] for j in np.flatnonzero(weak)]
        raise RankDeficientError(
            f"design matrix is rank deficient; collinear columns: {', '.join(bad)}", bad)
    return solve_triangular(R, Q.T @ Y)


def _ols(Z, y):
    """Least squares via lstsq, tolerant of collinear columns (minimum-norm solution)."""
    beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
    resid = y - Z @ beta
    return beta, resid


# ---------------------------------------------------------------------------
# VAR
# ---------------------------------------------------------------------------

@dataclass
class VarModel:
    """Fitted VAR(p).

    ``coefs[l-1][i, j]`` is the effect of series ``j`` at lag ``l`` on
    series ``i``. ``sigma`` divides residual cross-products by
    ``t_effective = T - p``.
    """

    order: int
    intercept: np.ndarray
    coefs: np.ndarray
    resid: np.ndarray
    sigma: np.ndarray
    names: tuple
    t_effective: int

    @property
    def n_series(self):
        return self.intercept.shape[0]

    def predict_next(self, lags):
        """One step ahead from ``lags``, the last ``order`` rows, oldest first."""
        lags = np.asarray(lags, dtype=float)
        out = self.intercept.copy()
        for l in range(1, self.order + 1):
            out += self.coefs[l - 1] @ lags[-l]
        return out

    def companion_spectral_radius(self):
        return spectral_radius(self.coefs)

    def to_dict(self):
        return {
            "order": self.order,
            "names": list(self.names),
            "intercept": self.intercept.tolist(),
            "coefs": self.coefs.tolist(),
            "sigma": self.sigma.tolist(),
            "t_effective": self.t_effective,
        }


def spectral_radius(coefs):
    """Largest eigenvalue modulus of the VAR companion matrix."""
    coefs = np.asarray(coefs, dtype=float)
    p, m, _ = coefs.shape
    companion = np.zeros((m * p, m * p))
    companion[:m] = np.hstack(list(coefs))
    if p > 1:
        companion[m:, :-m] = np.eye(m * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def min_rows_for_var(m, p):
    return m * p + p + 2


def fit_var(frame: TimeSeriesFrame, p=1):
    """Equation-by-equation OLS of ``Y_t`` on ``[1, Y_{t-1}, ..., Y_{t-p}]`` (QR solve)."""
    if p < 1:
        raise ParameterError("VAR order must be >= 1")
    Y = frame.values
    T, m = Y.shape
    if T - p <= m * p + 1:
        raise InsufficientDataError(
            f"VAR({p}) on {m} series needs at least {min_rows_for_var(m, p)} rows, got {T}")
    Z, target = _lag_design(Y, p)
    names = ["const"] + [f"{n}.L{l}" for l in range(1, p + 1) for n in frame.names]
    B = _qr_solve(Z, target, names)
    resid = target - Z @ B
    t_eff = T - p
    sigma = resid.T @ resid / t_eff
    sigma = (sigma + sigma.T) / 2.0
    coefs = np.stack([B[1 + (l - 1) * m:1 + l * m].T for l in range(1, p + 1)])
    return VarModel(p, B[0].copy(), coefs, resid, sigma, frame.names, t_eff)


@dataclass
class ForecastResult:
    predicted: np.ndarray
    actual: np.ndarray | None
    names: tuple
    mode: str
    rmse: dict = field(default_factory=dict)

    def rows(self):
        """``(step_index, series, actual, predicted)`` tuples, step-major."""
        for step in range(self.predicted.shape[0]):
            for j, name in enumerate(self.names):
                actual = None if self.actual is None else float(self.actual[step, j])
                yield step, name, actual, float(self.predicted[step, j])


def forecast(model: VarModel, history, horizon=None, mode="one_step_with_actuals", actuals=None):
    """Forecast ``horizon`` steps after the end of ``history``.

    ``one_step_with_actuals`` uses observed values from ``actuals`` as lags
    for every later step; ``recursive`` feeds predictions back. RMSE per
    series is reported whenever ``actuals`` is given.
    """
    if mode not in FORECAST_MODES:
        raise ParameterError(f"mode must be one of {FORECAST_MODES}")
    hist = history.values if isinstance(history, TimeSeriesFrame) else np.asarray(history, float)
    act = None
    if actuals is not None:
        act = actuals.values if isinstance(actuals, TimeSeriesFrame) else np.asarray(actuals, float)
        if act.ndim == 1:
            act = act[None, :]
    if horizon is None:
        if act is None:
            raise ParameterError("horizon or actuals required")
        horizon = act.shape[0]
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    if hist.shape[0] < model.order:
        raise InsufficientDataError(f"need {model.order} history rows, got {hist.shape[0]}")
    if hist.shape[1] != model.n_series:
        raise ShapeError(f"model has {model.n_series} series, history has {hist.shape[1]}")
    if act is not None:
        if act.shape[0] < horizon:
            raise ShapeError(f"{act.shape[0]} actual rows for horizon {horizon}")
        act = act[:horizon]
    elif mode == "one_step_with_actuals":
        raise ParameterError("one_step_with_actuals needs the observed values")

    window = list(hist[-model.order:])
    preds = np.empty((horizon, model.n_series))
    for step in range(horizon):
        preds[step] = model.predict_next(window[-model.order:])
        window.append(act[step] if mode == "one_step_with_actuals" else preds[step])

    scores = {}
    if act is not None:
        scores = {n: rmse(act[:, j], preds[:, j]) for j, n in enumerate(model.names)}
    return ForecastResult(preds, act, model.names, mode, scores)


@dataclass
class LagSelection:
    orders: list
    aic: list
    chosen: int
    t_effective: int

    def to_dict(self):
        return {"orders": self.orders, "aic": self.aic, "chosen": self.chosen,
                "t_effective": self.t_effective}


def select_order(frame: TimeSeriesFrame, p_max):
    """AIC over orders ``1..p_max`` on the common sample ``t >= p_max``.

    ``AIC(p) = ln det(Sigma_p) + 2 (m^2 p + m) / T_eff``; ties go to the
    smaller order.
    """
    if p_max < 1:
        raise ParameterError("p_max must be >= 1")
    T, m = frame.values.shape
    if T - p_max <= m * p_max + 1:
        raise InsufficientDataError(
            f"order {p_max} on {m} series needs at least {min_rows_for_var(m, p_max)} rows, got {T}")
    orders, aics = [], []
    for p in range(1, p_max + 1):
        sub = TimeSeriesFrame(frame.values[p_max - p:], frame.names)
        model = fit_var(sub, p)
        sign, logdet = np.linalg.slogdet(model.sigma)
        if sign <= 0:
            raise DegenerateFitError(f"residual covariance of VAR({p}) is singular")
        orders.append(p)
        aics.append(float(logdet + 2.0 * (m * m * p + m) / model.t_effective))
    best = min(range(len(aics)), key=lambda i: (aics[i], orders[i]))
    return LagSelection(orders, aics, orders[best], T - p_max)


# ---------------------------------------------------------------------------
# ADF
# ---------------------------------------------------------------------------

@dataclass
class AdfResult:
    statistic: float
    lags_used: int
    n_obs: int
    critical_values: dict
    level: str
    stationary: bool
    trend_warning: bool
    regression: str = "c"

    def to_dict(self):
        return {
            "statistic": self.statistic,
            "lags_used": self.lags_used,
            "n_obs": self.n_obs,
            "regression": self.regression,
            "critical_values": self.critical_values,
            "level": self.level,
            "stationary": self.stationary,
            "trend_warning": self.trend_warning,
        }


def schwert_lag(T):
    return int(np.floor(12.0 * (T / 100.0) ** 0.25))


def adf_test(series, max_lag=None, level="5%"):
    """Augmented Dickey-Fuller test with a constant and no trend.

    Regresses ``dy_t`` on ``[1, y_{t-1}, dy_{t-1}, ..., dy_{t-max_lag}]`` and
    returns the t-ratio of the ``y_{t-1}`` coefficient. Lagged differences
    that are collinear with earlier columns are dropped. ``trend_warning``
    flags a drift the constant-only form cannot absorb.
    """
    if level not in ADF_CRITICAL_VALUES:
        raise ParameterError(f"level must be one of {tuple(ADF_CRITICAL_VALUES)}")
    y = np.asarray(series, dtype=float).ravel()
    T = y.size
    if not np.all(np.isfinite(y)):
        raise InputError("series contains non-finite values")
    if T < 2 or np.ptp(y) == 0:
        raise InputError("constant series has zero variance")
    if max_lag is None:
        max_lag = max(0, min(schwert_lag(T), T - 11))
    if max_lag < 0:
        raise ParameterError("max_lag must be >= 0")
    if T <= max_lag + 10:
        raise InsufficientDataError(f"ADF with {max_lag} lags needs more than {max_lag + 10} points")

    dy = np.diff(y)
    k = max_lag
    target = dy[k:]
    cols = [np.ones(target.size), y[k:-1]]
    cols += [dy[k - j:dy.size - j] for j in range(1, k + 1)]
    Z = np.column_stack(cols)

    # drop lagged differences that add nothing (e.g. constant increments)
    keep = [0, 1]
    for j in range(2, Z.shape[1]):
        trial = Z[:, keep + [j]]
        if np.linalg.matrix_rank(trial) == len(keep) + 1:
            keep.append(j)
    Z = Z[:, keep]

    beta, resid = _ols(Z, target)
    dof = Z.shape[0] - Z.shape[1]
    s2 = resid @ resid / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.pinv(Z.T @ Z)
    se = float(np.sqrt(max(cov[1, 1], 0.0)))
    coef = float(beta[1])
    if resid @ resid <= 1e-20 * max(target @ target, 1.0):
        # exact fit (deterministic increments): no evidence against a unit root
        stat = 0.0
    elif se > 0:
        stat = coef / se
    else:
        stat = float(np.copysign(np.inf, coef))

    sd = dy.std(ddof=1) if dy.size > 1 else 0.0
    drift = abs(dy.mean())
    trend_warning = bool(drift > 0 and (sd == 0 or drift / (sd / np.sqrt(dy.size)) > 3.0))

    return AdfResult(
        statistic=stat,
        lags_used=len(keep) - 2,
        n_obs=int(target.size),
        critical_values=dict(ADF_CRITICAL_VALUES),
        level=level,
        stationary=bool(stat < ADF_CRITICAL_VALUES[level]),
        trend_warning=trend_warning,
    )


# ---------------------------------------------------------------------------
# Granger causality
# ---------------------------------------------------------------------------

def f_sf(F, d1, d2):
    """Upper tail of the F(d1, d2) distribution via the regularized incomplete beta."""
    if F <= 0:
        return 1.0
    return float(betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * F)))


@dataclass
class GrangerResult:
    cause: str
    effect: str
    lags: int
    f_statistic: float
    df_num: int
    df_denom: int
    p_value: float
    level: float
    causal: bool

    def to_dict(self):
        return {
            "cause": self.cause,
            "effect": self.effect,
            "lags": self.lags,
            "f_statistic": self.f_statistic,
            "df": [self.df_num, self.df_denom],
            "p_value": self.p_value,
            "level": self.level,
            "causal": self.causal,
        }


def granger_test(frame: TimeSeriesFrame, cause, effect, p=1, level=0.05):
    """Does adding ``p`` lags of ``cause`` improve the AR(p) fit of ``effect``?

    ``F = ((RSS_r - RSS_u) / p) / (RSS_u / (n - 2p - 1))`` with ``n = T - p``
    usable observations.
    """
    if cause == effect:
        raise ParameterError("cause and effect must differ")
    if p < 1:
        raise ParameterError("lag order must be >= 1")
    x = frame.column(cause)
    y = frame.column(effect)
    n = frame.n_obs - p
    df_denom = n - 2 * p - 1
    if df_denom < 1:
        raise InsufficientDataError(
            f"Granger test with {p} lags needs at least {3 * p + 2} rows, got {frame.n_obs}")

    Zr, target = _lag_design(y[:, None], p)
    Zx, _ = _lag_design(x[:, None], p)
    Zu = np.column_stack([Zr, Zx[:, 1:]])
    _, res_r = _ols(Zr, target[:, 0])
    _, res_u = _ols(Zu, target[:, 0])
    rss_r, rss_u = float(res_r @ res_r), float(res_u @ res_u)
    scale = float(np.sum((target - target.mean()) ** 2))
    if rss_u <= 1e-24 * max(scale, 1.0):
        raise DegenerateFitError(f"{effect} is fitted exactly by the unrestricted model")
    F = max(0.0, ((rss_r - rss_u) / p) / (rss_u / df_denom))
    pval = f_sf(F, p, df_denom)
    return GrangerResult(cause, effect, p, F, p, df_denom, pval, level, bool(pval < level))


def granger_matrix(frame: TimeSeriesFrame, p=1, level=0.05):
    """Granger tests for every ordered pair of distinct series."""
    return [granger_test(frame, c, e, p, level)
            for c in frame.names for e in frame.names if c != e]
