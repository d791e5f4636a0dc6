"""Performance metrics for monthly return series."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError, DegenerateError

__all__ = ["Metrics", "drawdowns", "metrics", "vol_scale", "cumulative_log_returns"]

PERIODS_PER_YEAR = 12


@dataclass(frozen=True)
class Metrics:
    """Annualized Sharpe and Sortino (zero risk-free rate), drawdowns in percent."""

    sharpe: float
    sortino: float
    avg_dd: float
    max_dd: float
    pct_positive: float

    def as_dict(self) -> dict:
        return asdict(self)


def drawdowns(returns) -> np.ndarray:
    """Drawdown of the compounded wealth curve after each month, as a fraction.

    The running peak starts at the initial wealth of 1.
    """
    r = np.asarray(returns, dtype=float)
    wealth = np.cumprod(1.0 + r)
    peak = np.maximum.accumulate(np.maximum(wealth, 1.0))
    return wealth / peak - 1.0


def metrics(returns, strict: bool = True) -> Metrics:
    """Sharpe, Sortino, average and maximum drawdown, share of positive months.

    Sortino divides by the downside deviation ``sqrt(mean(min(r, 0)^2))``
    and is ``+inf`` when no month lost money.  With ``strict`` a zero
    standard deviation raises; otherwise a flat zero series scores 0 and any
    other undefined ratio is NaN.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or len(r) < 2:
        raise ConfigError("metrics need at least two monthly returns")
    mean = r.mean()
    std = r.std(ddof=1)
    scale = math.sqrt(PERIODS_PER_YEAR)
    if std > 0:
        sharpe = mean / std * scale
    elif strict:
        raise DegenerateError("Sharpe ratio undefined for a zero-volatility series")
    else:
        sharpe = 0.0 if mean == 0 else math.nan

    downside = math.sqrt(np.mean(np.minimum(r, 0.0) ** 2))
    if downside > 0:
        sortino = mean / downside * scale
    elif mean == 0 and not strict:
        sortino = 0.0
    else:
        sortino = math.inf

    dd = drawdowns(r) * 100.0
    return Metrics(
        sharpe=float(sharpe),
        sortino=float(sortino),
        avg_dd=float(dd.mean()),
        max_dd=float(dd.min()),
        pct_positive=float(np.mean(r > 0)),
    )


def vol_scale(returns, target_annual: float = 0.10) -> np.ndarray:
    """Rescale a whole series so its annualized volatility equals ``target_annual``."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 12:
        raise ConfigError("volatility scaling needs at least 12 observations")
    if target_annual <= 0:
        raise ConfigError("volatility target must be positive")
    vol = r.std(ddof=1) * math.sqrt(PERIODS_PER_YEAR)
    if vol == 0:
        raise DegenerateError("cannot volatility-scale a constant series")
    return r * (target_annual / vol)


def cumulative_log_returns(returns) -> np.ndarray:
    return np.cumsum(np.log1p(np.asarray(returns, dtype=float)))
