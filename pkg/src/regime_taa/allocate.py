"""Position sizing: map forecast vectors to portfolio weights.

All schemes scale the selected forecasts by their summed magnitude, so a
portfolio with any position has gross exposure one.  When a scheme finds
nothing to hold it returns zeros and emits :class:`FlatPositionWarning`.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import ConfigError, FlatPositionWarning, NumericalError, ShapeError

__all__ = [
    "SCHEMES",
    "size_lns",
    "size_los",
    "size_lo",
    "size_mx",
    "size",
    "default_omega",
    "bl_posterior",
    "gross_normalize",
    "mvo_scores",
]

SCHEMES = ("lns", "los", "lo", "mx")


def _check(y, l):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ShapeError("forecast vector must be 1-D")
    if not np.all(np.isfinite(y)):
        raise ConfigError("forecasts must be finite")
    if not isinstance(l, (int, np.integer)) or l < 1:
        raise ConfigError(f"selection breadth l must be a positive integer, got {l!r}")
    return y


def _scale(y, chosen, scheme):
    w = np.zeros_like(y)
    total = np.abs(y[chosen]).sum() if len(chosen) else 0.0
    if total == 0:
        warnings.warn(f"{scheme}: no position to take, staying in cash", FlatPositionWarning, stacklevel=3)
        return w
    w[chosen] = y[chosen] / total
    return w


def _top(y, l):
    # stable sort keeps ticker order on ties
    return np.argsort(-y, kind="stable")[:l]


def _bottom(y, l):
    return np.argsort(y, kind="stable")[:l]


def size_lns(y, l: int) -> np.ndarray:
    """Long the top ``l`` positive forecasts and short the bottom ``l`` negative ones."""
    y = _check(y, l)
    high = [j for j in _top(y, l) if y[j] > 0]
    low = [j for j in _bottom(y, l) if y[j] < 0]
    return _scale(y, np.array(high + low, dtype=int), "lns")


def size_los(y, l: int) -> np.ndarray:
    """Take positions, with the forecast's sign, on the ``l`` largest-magnitude forecasts."""
    y = _check(y, l)
    chosen = np.argsort(-np.abs(y), kind="stable")[:l]
    chosen = chosen[y[chosen] != 0]
    return _scale(y, chosen, "los")


def size_lo(y, l: int) -> np.ndarray:
    """Long only: the top ``l`` strictly positive forecasts."""
    y = _check(y, l)
    chosen = np.array([j for j in _top(y, l) if y[j] > 0], dtype=int)
    return _scale(y, chosen, "lo")


def size_mx(y, l: int, p_next) -> np.ndarray:
    """Long-or-short when Regime 0 is the most likely next regime, long-only otherwise."""
    if int(np.argmax(np.asarray(p_next, dtype=float))) == 0:
        return size_los(y, l)
    return size_lo(y, l)


def size(scheme: str, y, l: int, p_next=None) -> np.ndarray:
    """Dispatch to a sizing scheme by name."""
    if scheme == "lns":
        return size_lns(y, l)
    if scheme == "los":
        return size_los(y, l)
    if scheme == "lo":
        return size_lo(y, l)
    if scheme == "mx":
        if p_next is None:
            raise ConfigError("mx sizing needs the next-month regime distribution")
        return size_mx(y, l, p_next)
    raise ConfigError(f"unknown sizing scheme {scheme!r}")


def gross_normalize(v) -> np.ndarray:
    """Scale a vector to unit gross exposure; zero vectors stay zero."""
    v = np.asarray(v, dtype=float)
    total = np.abs(v).sum()
    return v / total if total > 0 else np.zeros_like(v)


def _pd_factor(sigma):
    """Cholesky factor of ``sigma``, regularizing its diagonal once if needed."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeError("covariance must be square")
    if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-14):
        raise NumericalError("covariance matrix is not symmetric")
    try:
        return sigma, cho_factor(sigma, lower=True)
    except LinAlgError:
        d = sigma.shape[0]
        bump = 1e-8 * np.trace(sigma) / d
        reg = sigma + bump * np.eye(d)
        try:
            return reg, cho_factor(reg, lower=True)
        except LinAlgError:
            raise NumericalError("covariance is not positive definite even after regularization") from None


def default_omega(sigma, tau: float = 0.05, pick=None) -> np.ndarray:
    """Diagonal view uncertainty ``diag(tau * P Sigma P')``."""
    sigma = np.asarray(sigma, dtype=float)
    P = np.eye(sigma.shape[0]) if pick is None else np.asarray(pick, dtype=float)
    return np.diag(np.diag(tau * P @ sigma @ P.T))


def bl_posterior(mu, sigma, q, tau: float = 0.05, omega=None, pick=None) -> np.ndarray:
    """Black-Litterman posterior mean of expected returns.

    Evaluates ``[(tau S)^-1 + P' O^-1 P]^-1 [(tau S)^-1 mu + P' O^-1 q]``
    in its equivalent update form ``mu + tau S P' (P tau S P' + O)^-1 (q - P mu)``
    so only one symmetric positive-definite system is solved.

    Parameters
    ----------
    mu : array (d,)
        Prior (sample) mean returns.
    sigma : array (d, d)
        Sample covariance; regularized once on the diagonal if not positive definite.
    q : array (k,)
        View returns.
    tau : float
        Prior uncertainty scale.
    omega : array (k, k), optional
        View uncertainty; defaults to :func:`default_omega`.
    pick : array (k, d), optional
        Pick matrix; defaults to the identity (one view per asset).
    """
    mu = np.asarray(mu, dtype=float)
    q = np.asarray(q, dtype=float)
    if tau <= 0:
        raise ConfigError("tau must be positive")
    sigma, _ = _pd_factor(sigma)
    d = len(mu)
    if sigma.shape != (d, d):
        raise ShapeError("covariance does not match the mean vector")
    P = np.eye(d) if pick is None else np.asarray(pick, dtype=float)
    if P.shape != (len(q), d):
        raise ShapeError(f"pick matrix must have shape {(len(q), d)}")
    O = default_omega(sigma, tau, P) if omega is None else np.asarray(omega, dtype=float)
    if O.shape != (len(q), len(q)) or np.any(np.diag(O) <= 0):
        raise ConfigError("view uncertainty must be a positive definite diagonal matrix")

    tS = tau * sigma
    M = P @ tS @ P.T + O
    try:
        factor = cho_factor(M, lower=True)
    except LinAlgError:
        raise NumericalError("view system is not positive definite") from None
    return mu + tS @ P.T @ cho_solve(factor, q - P @ mu)


def mvo_scores(mu, sigma) -> np.ndarray:
    """Tangency direction ``Sigma^-1 mu`` used as a forecast for the sizing schemes."""
    mu = np.asarray(mu, dtype=float)
    _, factor = _pd_factor(sigma)
    if factor[0].shape != (len(mu), len(mu)):
        raise ShapeError("covariance does not match the mean vector")
    return cho_solve(factor, mu)
