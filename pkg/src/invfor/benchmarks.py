"""Reference forecasters and error metrics.

* persistence: the previous observation,
* ARMAX fitted by least squares, with the MA part estimated by the two-stage
  long-autoregression method and orders chosen by AICc.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHistory, SingularDesign, ZeroRange


def persistence_forecast(load) -> np.ndarray:
    """Forecasts for hours ``1..T-1``: each equals the previous observation."""
    x = np.asarray(load, float)
    if len(x) < 2:
        raise InsufficientHistory("persistence needs at least two observations")
    return x[:-1].copy()


# ---------------------------------------------------------------------------
# ARMAX
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ArmaxModel:
    mu: float
    phi: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    sigma2: float

    @property
    def P(self) -> int:
        return len(self.phi)

    @property
    def Q(self) -> int:
        return len(self.theta)

    @property
    def n_params(self) -> int:
        return 1 + self.P + self.Q + len(self.gamma)

    def predict_next(self, past_load, z_next, past_resid) -> float:
        """One-step forecast from the most recent loads and residuals (latest last)."""
        x = np.asarray(past_load, float)
        e = np.asarray(past_resid, float)
        value = self.mu + float(np.dot(self.gamma, np.asarray(z_next, float).reshape(-1)))
        for p in range(1, self.P + 1):
            value += self.phi[p - 1] * x[-p]
        for q in range(1, self.Q + 1):
            value += self.theta[q - 1] * e[-q]
        return float(value)


@dataclass(frozen=True)
class ArmaxFit:
    """A fitted model with its in-sample residuals (NaN before ``start``)."""

    model: ArmaxModel
    residuals: np.ndarray
    rss: float
    n_obs: int
    start: int

    def aicc(self) -> float:
        return aicc(self.rss, self.n_obs, self.model.n_params)

    def forecast_next(self, load, z_next) -> float:
        """Forecast the hour after the fitted sample."""
        resid = np.nan_to_num(self.residuals)
        return self.model.predict_next(load, z_next, resid)


def aicc(rss: float, n_obs: int, k: int) -> float:
    if n_obs - k - 1 <= 0:
        return math.inf
    rss = max(rss, 1e-300)
    return n_obs * math.log(rss / n_obs) + 2 * k + 2 * k * (k + 1) / (n_obs - k - 1)


def _lag_matrix(x, lags: int, rows: np.ndarray) -> np.ndarray:
    return np.column_stack([x[rows - p] for p in range(1, lags + 1)]) if lags else \
        np.zeros((len(rows), 0))


def _ols(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef, _, rank, sv = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1] or (len(sv) and sv[-1] <= 1e-10 * sv[0]):
        raise SingularDesign(f"design matrix rank {rank} < {design.shape[1]} columns")
    return coef


def _exog(Z, T) -> np.ndarray:
    if Z is None:
        return np.zeros((0, T))
    Z = np.asarray(Z, float)
    return Z.reshape(-1, T) if Z.size else np.zeros((0, T))


def fit_armax(load, Z, P: int, Q: int, start: int | None = None,
              long_ar: int | None = None) -> ArmaxFit:
    """Least-squares ARMAX fit.

    ``Z`` is ``(R, T)``, aligned with ``load`` (column ``t`` explains
    ``load[t]``).  With ``Q == 0`` this is plain OLS.  Otherwise a long AR
    with the same exogenous inputs is fitted first and its lagged residuals
    stand in for the innovations in a second OLS.  ``start`` is the first
    observation used as a regression target; it defaults to the smallest
    index with full lag history.
    """
    x = np.asarray(load, float)
    T = len(x)
    Zm = _exog(Z, T)
    R = Zm.shape[0]
    if P < 0 or Q < 0:
        raise ValueError("orders must be nonnegative")
    if long_ar is None:
        long_ar = max(8, P + Q) if Q else 0
    min_start = max(P, long_ar + Q if Q else 0)
    start = min_start if start is None else start
    if start < min_start:
        raise InsufficientHistory(f"start {start} leaves too little lag history")
    n_obs = T - start
    k = 1 + P + Q + R
    if T <= P + Q + R + 1 or n_obs <= k:
        raise InsufficientHistory(f"{T} observations cannot identify {k} coefficients")

    innov = np.zeros(T)
    if Q:
        rows = np.arange(long_ar, T)
        design = np.column_stack([np.ones(len(rows)), _lag_matrix(x, long_ar, rows), Zm[:, rows].T])
        coef = _ols(design, x[rows])
        innov[rows] = x[rows] - design @ coef

    rows = np.arange(start, T)
    design = np.column_stack([
        np.ones(n_obs), _lag_matrix(x, P, rows), Zm[:, rows].T, _lag_matrix(innov, Q, rows),
    ])
    coef = _ols(design, x[rows])
    fitted = design @ coef
    resid = np.full(T, np.nan)
    resid[rows] = x[rows] - fitted
    rss = float(np.sum(resid[rows] ** 2))
    model = ArmaxModel(
        mu=float(coef[0]),
        phi=coef[1:1 + P].copy(),
        gamma=coef[1 + P:1 + P + R].copy(),
        theta=coef[1 + P + R:].copy(),
        sigma2=rss / max(n_obs - k, 1),
    )
    return ArmaxFit(model, resid, rss, n_obs, start)


def select_order_aicc(load, Z, p_max: int, q_max: int, grid=None) -> tuple[int, int]:
    """Order ``(P, Q)`` with the lowest AICc; ties go to the smallest pair.

    All candidates are fitted on the same sample so their criteria compare.
    """
    grid = sorted(grid if grid is not None else
                  itertools.product(range(p_max + 1), range(q_max + 1)))
    if not grid:
        raise ValueError("empty order grid")
    top_p = max(p for p, _ in grid)
    top_q = max(q for _, q in grid)
    long_ar = max(8, top_p + top_q)
    start = max(top_p, long_ar + top_q if top_q else 0)
    best = None
    for P, Q in grid:
        fit = fit_armax(load, Z, P, Q, start=start, long_ar=long_ar)
        score = fit.aicc()
        if best is None or score < best[0]:
            best = (score, (P, Q))
    return best[1]


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    nrmse: float
    smape: float
    rmse: float
    smape_skipped: int = 0


def _pair(forecast, actual):
    f = np.asarray(forecast, float).reshape(-1)
    a = np.asarray(actual, float).reshape(-1)
    if len(f) != len(a) or len(a) == 0:
        raise ValueError("forecast and actual must have the same nonzero length")
    return f, a


def rmse(forecast, actual) -> float:
    f, a = _pair(forecast, actual)
    return float(np.sqrt(np.mean((f - a) ** 2)))


def nrmse(forecast, actual) -> float:
    """RMSE divided by the range of ``actual`` over the evaluation window."""
    f, a = _pair(forecast, actual)
    span = float(a.max() - a.min())
    if span == 0.0:
        raise ZeroRange("actual series is constant; NRMSE is undefined")
    return rmse(f, a) / span


def smape(forecast, actual, return_skipped: bool = False):
    """Mean of ``|f - a| / ((|f| + |a|) / 2)``.

    Hours where both values are zero are skipped; the count is returned with
    ``return_skipped=True``.
    """
    f, a = _pair(forecast, actual)
    denom = (np.abs(f) + np.abs(a)) / 2.0
    keep = denom > 0
    skipped = int((~keep).sum())
    value = float(np.mean(np.abs(f - a)[keep] / denom[keep])) if keep.any() else 0.0
    return (value, skipped) if return_skipped else value


def metrics(forecast, actual) -> MetricsReport:
    s, skipped = smape(forecast, actual, return_skipped=True)
    return MetricsReport(nrmse(forecast, actual), s, rmse(forecast, actual), skipped)
