"""Regime-conditioned next-month forecasts: naive Sharpe, Black-Litterman views, ridge."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DataError, ShapeError, SingularSystemError

__all__ = [
    "AssetPanel",
    "RegimeConditionalStats",
    "RidgeModel",
    "most_likely_regime",
    "conditional_moments",
    "naive_forecast",
    "bl_views",
    "ridge_fit",
    "fit_regime_ridge",
    "ridge_forecast",
]


@dataclass
class AssetPanel:
    """Simple monthly returns (decimal), one column per ticker."""

    returns: pd.DataFrame

    def __post_init__(self):
        if not isinstance(self.returns.index, pd.DatetimeIndex):
            raise DataError("asset returns must be indexed by month dates")
        vals = self.returns.to_numpy(dtype=float)
        if np.isnan(vals).any():
            raise DataError("asset returns contain missing values")
        if np.any(vals <= -1):
            raise DataError("simple returns must exceed -1")

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.returns.index

    @property
    def tickers(self) -> list[str]:
        return list(self.returns.columns)

    @classmethod
    def from_csv(cls, path_or_buf) -> "AssetPanel":
        frame = pd.read_csv(path_or_buf, index_col=0, parse_dates=[0], float_precision="round_trip")
        frame.index = pd.DatetimeIndex(frame.index).to_period("M").to_timestamp()
        return cls(frame.astype(float))


@dataclass
class RegimeConditionalStats:
    """Per-asset moments of returns observed in one regime.

    ``fallback[j]`` is true where the regime had fewer than ``min_obs``
    months or zero dispersion and the unconditional window moments were
    used instead.
    """

    regime: int
    mean: np.ndarray
    std: np.ndarray
    sharpe: np.ndarray
    n_obs: int
    fallback: np.ndarray


@dataclass
class RidgeModel:
    regime: int
    coef: np.ndarray
    lam: float
    fallback: bool = False
    intercept: np.ndarray | None = None

    def predict(self, x) -> np.ndarray:
        out = np.asarray(x, dtype=float) @ self.coef
        if self.intercept is not None:
            out = out + self.intercept
        return out


def _returns_matrix(returns) -> np.ndarray:
    R = returns.to_numpy(dtype=float) if isinstance(returns, (pd.DataFrame, pd.Series)) else np.asarray(returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    return R


def _sharpe(mean, std):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(std > 0, mean / np.where(std > 0, std, 1.0), 0.0)


def most_likely_regime(p_next) -> int:
    """Index of the largest probability; ties go to the lowest index."""
    return int(np.argmax(np.asarray(p_next, dtype=float)))


def conditional_moments(returns, labels, regime: int, min_obs: int = 3, n_regimes: int | None = None) -> RegimeConditionalStats:
    """Sample mean and standard deviation of returns over months in ``regime``.

    Parameters
    ----------
    returns : array (n,) or (n, d)
        Returns aligned with ``labels``.
    labels : int array (n,)
    regime : int
    min_obs : int
        Fewer observations than this, or a zero standard deviation, falls
        back to the moments of the whole window.
    n_regimes : int, optional
        Valid regimes are ``0..n_regimes-1``; defaults to ``max(label) + 1``.
    """
    R = _returns_matrix(returns)
    lab = np.asarray(labels, dtype=int)
    if len(lab) != R.shape[0]:
        raise ShapeError("returns and labels are not aligned")
    upper = int(lab.max()) + 1 if n_regimes is None else n_regimes
    if not 0 <= regime < upper:
        raise ConfigError(f"regime {regime} outside 0..{upper - 1}")

    sub = R[lab == regime]
    n_obs = sub.shape[0]
    uncond_mean = R.mean(axis=0)
    uncond_std = R.std(axis=0, ddof=1) if R.shape[0] > 1 else np.zeros(R.shape[1])
    if n_obs >= max(min_obs, 2):
        mean = sub.mean(axis=0)
        std = sub.std(axis=0, ddof=1)
        fallback = std == 0
    else:
        mean = uncond_mean.copy()
        std = uncond_std.copy()
        fallback = np.ones(R.shape[1], dtype=bool)
    mean = np.where(fallback, uncond_mean, mean)
    std = np.where(fallback, uncond_std, std)
    return RegimeConditionalStats(regime, mean, std, _sharpe(mean, std), n_obs, fallback)


def naive_forecast(returns, labels, p_next, min_obs: int = 3) -> np.ndarray:
    """Conditional Sharpe ratio of each asset under the most likely next regime."""
    p_next = np.asarray(p_next, dtype=float)
    regime = most_likely_regime(p_next)
    return conditional_moments(returns, labels, regime, min_obs, n_regimes=len(p_next)).sharpe


def bl_views(returns, labels, p_next, min_obs: int = 3) -> np.ndarray:
    """Conditional mean return of each asset under the most likely next regime."""
    p_next = np.asarray(p_next, dtype=float)
    regime = most_likely_regime(p_next)
    return conditional_moments(returns, labels, regime, min_obs, n_regimes=len(p_next)).mean


def ridge_fit(X, y, lam: float = 1.0) -> np.ndarray:
    """Closed-form ridge coefficients ``(X'X + lam I)^-1 X'y`` without intercept.

    ``y`` may hold several targets as columns; the result then has one
    coefficient column per target.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] < 1:
        raise DataError("ridge needs at least one row")
    if y.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows of X but {y.shape[0]} targets")
    if lam < 0:
        raise ConfigError("ridge penalty must be nonnegative")
    A = X.T @ X + lam * np.eye(X.shape[1])
    if lam == 0 and np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystemError("X'X is singular; use a positive ridge penalty")
    try:
        return np.linalg.solve(A, X.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from None


def fit_regime_ridge(
    factors,
    returns,
    labels,
    n_regimes: int,
    lam: float = 1.0,
    min_obs: int = 3,
    intercept: bool = False,
) -> tuple[list[RidgeModel], RidgeModel]:
    """One ridge model per regime predicting next-month returns from factors.

    Row ``s`` of ``factors`` is paired with row ``s + 1`` of ``returns``; a
    pair belongs to regime ``labels[s]``.  Regimes with fewer than
    ``min_obs`` pairs get the pooled model, flagged as fallback.

    Returns
    -------
    models : list of RidgeModel, indexed by regime
    pooled : RidgeModel fitted on every pair
    """
    F = np.asarray(factors, dtype=float)
    R = _returns_matrix(returns)
    lab = np.asarray(labels, dtype=int)
    if not (F.shape[0] == R.shape[0] == len(lab)):
        raise ShapeError("factors, returns and labels must share their row count")
    if F.shape[0] < 2:
        raise DataError("need at least two months to pair factors with next returns")
    X, Y, src = F[:-1], R[1:], lab[:-1]

    def _fit(rows):
        Xs, Ys = X[rows], Y[rows]
        if intercept:
            xm, ym = Xs.mean(axis=0), Ys.mean(axis=0)
            coef = ridge_fit(Xs - xm, Ys - ym, lam)
            return coef, ym - xm @ coef
        return ridge_fit(Xs, Ys, lam), None

    coef, icpt = _fit(np.ones(len(src), dtype=bool))
    pooled = RidgeModel(-1, coef, lam, False, icpt)
    models = []
    for g in range(n_regimes):
        rows = src == g
        if rows.sum() < max(min_obs, 1):
            models.append(RidgeModel(g, pooled.coef, lam, True, pooled.intercept))
        else:
            coef, icpt = _fit(rows)
            models.append(RidgeModel(g, coef, lam, False, icpt))
    return models, pooled


def ridge_forecast(models: Sequence[RidgeModel], x_t, p_next, include_regime0: bool = True) -> np.ndarray:
    """Probability-weighted ridge forecast ``sum_i p_i * (x_t @ beta_i)``.

    With ``include_regime0=False`` the Regime 0 term is left out of the sum
    (the weights are not renormalized).
    """
    p_next = np.asarray(p_next, dtype=float)
    if len(models) != len(p_next):
        raise ShapeError(f"{len(models)} regime models for {len(p_next)} probabilities")
    x_t = np.asarray(x_t, dtype=float)
    if x_t.shape[-1] != models[0].coef.shape[0]:
        raise ShapeError("factor vector dimension does not match the ridge models")
    preds = np.array([m.predict(x_t) for m in models])
    weights = p_next.copy()
    if not include_regime0:
        weights[0] = 0.0
    return weights @ preds
