"""Paired comparisons between control and treatment strategy configurations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import ConfigError, ShapeError

__all__ = ["TTestResult", "NemenyiResult", "random_regime_control", "paired_t_test", "nemenyi_test"]


@dataclass(frozen=True)
class TTestResult:
    statistic: float
    pvalue: float
    df: int
    degenerate: bool = False


@dataclass(frozen=True)
class NemenyiResult:
    control_rank: float
    treatment_rank: float
    statistic: float
    pvalue: float


def random_regime_control(labels, seed, mode: str = "permute", n_regimes: int | None = None) -> np.ndarray:
    """Random label series for control experiments.

    ``"permute"`` shuffles the actual labels, keeping how often each regime
    occurs but destroying their timing; ``"iid"`` draws labels uniformly from
    ``0..n_regimes-1``.  ``seed`` may be an int or a sequence of ints.
    """
    lab = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(seed)
    if mode == "permute":
        return rng.permutation(lab)
    if mode == "iid":
        n = int(lab.max()) + 1 if n_regimes is None else n_regimes
        return rng.integers(0, n, size=len(lab))
    raise ConfigError(f"unknown control mode {mode!r}")


def _pair(control, treatment):
    c = np.asarray(control, dtype=float)
    t = np.asarray(treatment, dtype=float)
    if c.shape != t.shape or c.ndim != 1:
        raise ShapeError("control and treatment must be 1-D and equally long")
    return c, t


def paired_t_test(control, treatment) -> TTestResult:
    """One-sided paired t-test of H0: the control mean is at least the treatment mean.

    A zero-variance difference is reported as degenerate with p = 0.5.
    """
    c, t = _pair(control, treatment)
    n = len(c)
    if n < 2:
        raise ConfigError("paired t-test needs at least two pairs")
    d = t - c
    sd = d.std(ddof=1)
    if not sd > 0:
        return TTestResult(0.0, 0.5, n - 1, degenerate=True)
    stat = d.mean() / (sd / math.sqrt(n))
    return TTestResult(float(stat), float(stats.t.sf(stat, n - 1)), n - 1)


def nemenyi_test(control, treatment) -> NemenyiResult:
    """Rank-based comparison of two methods over paired blocks.

    Within each block the larger value ranks 2 and the smaller 1 (ties share
    1.5).  Metrics where less negative is better, such as maximum drawdown,
    follow the same rule.  The mean-rank difference is scaled by its
    Nemenyi standard error ``sqrt(k (k + 1) / (6 N))`` with ``k = 2``; for two
    methods the studentized range over sqrt(2) is a standard normal
    magnitude, so the p-value is two-sided normal.
    """
    c, t = _pair(control, treatment)
    n = len(c)
    if n < 1:
        raise ConfigError("need at least one block")
    t_rank = np.where(t > c, 2.0, np.where(t < c, 1.0, 1.5))
    c_rank = 3.0 - t_rank
    rc, rt = float(c_rank.mean()), float(t_rank.mean())
    se = math.sqrt(2 * 3 / (6.0 * n))
    z = abs(rt - rc) / se
    return NemenyiResult(rc, rt, z, float(2.0 * stats.norm.sf(z)))
