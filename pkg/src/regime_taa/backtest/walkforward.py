"""Fixed-window walk-forward backtest with random-regime controls.

Each month ``t`` past the first window the pipeline refits the regime model
on the trailing ``window_months`` factor rows, estimates the transition
matrix from the window labels, classifies month ``t``, propagates one step
and turns the next-regime distribution into forecasts and weights.  The
portfolio earns ``w @ r[t+1]``.

The work is split in two phases.  The regime path (clustering plus
classification) does not depend on labels being real, so it is computed
once; strategy legs are then replayed with either the actual window labels
(treatment) or randomized ones (controls).
"""
from __future__ import annotations

import hashlib
import logging
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import pandas as pd

from ..allocate import SCHEMES, bl_posterior, gross_normalize, mvo_scores, size
from ..errors import ConfigError, DataError, FlatPositionWarning, RegimeTaaError
from ..forecast import AssetPanel, bl_views, fit_regime_ridge, naive_forecast, ridge_forecast
from ..ingest import FactorPanel
from ..regimes import RegimeModel, classify, fit_regimes
from ..transition import estimate_transition, propagate
from ..transition import logger as transition_logger
from .metrics import Metrics, cumulative_log_returns, metrics, vol_scale
from .stats import nemenyi_test, paired_t_test, random_regime_control

logger = logging.getLogger(__name__)

__all__ = [
    "MODELS",
    "BENCHMARKS",
    "COMPARED_METRICS",
    "BacktestConfig",
    "RegimeStep",
    "AuditRecord",
    "StrategyResult",
    "BacktestResult",
    "ComparisonReport",
    "align",
    "regime_path",
    "run_strategies",
    "walk_forward",
    "run_comparison",
    "metrics_table",
    "returns_table",
    "weights_table",
    "cumulative_table",
]

MODELS = ("naive", "bl", "ridge", "mvo")
BENCHMARKS = ("spy", "ew")
# models whose forecasts depend on the regime labels
LABEL_MODELS = ("naive", "bl", "ridge")
COMPARED_METRICS = ("sharpe", "sortino", "max_dd", "pct_positive")

LabelTransform = Callable[[np.ndarray, int], np.ndarray]


@dataclass
class BacktestConfig:
    """Walk-forward settings.  Every field has a working default.

    ``r`` is the number of typical regimes (``"auto"`` runs the elbow rule
    on the first window and keeps that count).  ``bl_raw_weights`` adds a
    ``bl_raw`` strategy holding the gross-normalized posterior mean itself.
    ``include_regime0`` controls whether the ridge forecast keeps the
    Regime 0 term.
    """

    window_months: int = 48
    l_values: tuple = (2, 3, 4)
    schemes: tuple = SCHEMES
    models: tuple = MODELS
    vol_target_annual: float = 0.10
    seed: int = 0
    smoothing_alpha: float = 0.0
    r: int | str = 5
    k_max: int = 10
    n_init: int = 10
    ridge_lambda: float = 1.0
    ridge_intercept: bool = False
    include_regime0: bool = True
    min_obs: int = 3
    tau: float = 0.05
    bl_raw_weights: bool = False
    benchmark_ticker: str = "SPY"
    n_controls: int = 20
    control_mode: str = "permute"
    audit: bool = False

    def __post_init__(self):
        self.l_values = tuple(int(v) for v in self.l_values)
        self.schemes = tuple(self.schemes)
        self.models = tuple(self.models)
        if self.window_months < 12:
            raise ConfigError("window_months must be at least 12")
        if not self.vol_target_annual > 0:
            raise ConfigError("vol_target_annual must be positive")
        if not self.l_values or min(self.l_values) < 1:
            raise ConfigError("l_values must be positive integers")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad or not self.schemes:
            raise ConfigError(f"unknown sizing schemes {bad}; choose from {SCHEMES}")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise ConfigError(f"unknown models {bad}; choose from {MODELS}")
        if self.r != "auto" and (not isinstance(self.r, (int, np.integer)) or self.r < 1):
            raise ConfigError(f"r must be a positive integer or 'auto', got {self.r!r}")
        if self.smoothing_alpha < 0:
            raise ConfigError("smoothing_alpha must be nonnegative")
        if self.n_controls < 0:
            raise ConfigError("n_controls must be nonnegative")
        if self.control_mode not in ("permute", "iid"):
            raise ConfigError("control_mode must be 'permute' or 'iid'")

    @property
    def strategy_names(self) -> list[str]:
        names = [f"{m}_{s}_{l}" for m in self.models for s in self.schemes for l in self.l_values]
        if self.bl_raw_weights and "bl" in self.models:
            names.append("bl_raw")
        return names


@dataclass
class RegimeStep:
    """Regime state at decision month ``t`` (row index into the aligned panel)."""

    t: int
    model: RegimeModel | None
    labels: np.ndarray | None
    p_now: np.ndarray | None
    error: str | None = None


@dataclass
class AuditRecord:
    date: pd.Timestamp
    train_start: pd.Timestamp
    train_end: pd.Timestamp
    slice_hash: str
    state_hash: str
    poisoned_state_hash: str

    @property
    def ok(self) -> bool:
        return self.state_hash == self.poisoned_state_hash


@dataclass
class StrategyResult:
    """Out-of-sample monthly returns of one strategy.

    ``dates`` are the realization months (``t + 1``).  Metrics are always
    recomputed from ``monthly_returns``.
    """

    name: str
    dates: pd.DatetimeIndex
    monthly_returns: np.ndarray
    weights: np.ndarray | None = None
    flat_months: int = 0
    failed_months: int = 0

    @property
    def metrics(self) -> Metrics:
        return metrics(self.monthly_returns, strict=False)


@dataclass
class BacktestResult:
    strategies: dict[str, StrategyResult]
    steps: list[RegimeStep]
    tickers: list[str]
    config: BacktestConfig
    audit: list[AuditRecord] = field(default_factory=list)
    forecasts: pd.DataFrame | None = None

    def __getitem__(self, name: str) -> StrategyResult:
        return self.strategies[name]

    @property
    def names(self) -> list[str]:
        return list(self.strategies)

    @property
    def audit_passed(self) -> bool:
        return bool(self.audit) and all(a.ok for a in self.audit)


# --------------------------------------------------------------------------- alignment


def align(factors: FactorPanel, assets: AssetPanel, window_months: int):
    """Common dates of factors and returns as ``(dates, F, R)``."""
    fdates = pd.DatetimeIndex(factors.dates).to_period("M")
    adates = pd.DatetimeIndex(assets.dates).to_period("M")
    common = fdates.intersection(adates).sort_values()
    if len(common) < window_months + 1:
        raise ConfigError(
            f"insufficient history: {len(common)} overlapping months, need window_months + 1 = {window_months + 1}"
        )
    steps = np.diff(np.asarray([p.ordinal for p in common]))
    if np.any(steps != 1):
        raise DataError("overlapping factor and asset dates are not consecutive months")
    F = factors.factors[fdates.get_indexer(common)]
    R = assets.returns.to_numpy(dtype=float)[adates.get_indexer(common)]
    return common.to_timestamp(), F, R


@contextmanager
def _quiet(log: logging.Logger):
    level = log.level
    log.setLevel(logging.ERROR)
    try:
        yield
    finally:
        log.setLevel(level)


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        if a is None:
            h.update(b"none")
            continue
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode() + str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()


# --------------------------------------------------------------------------- phase 1: regimes


def _fit_month(t: int, F: np.ndarray, prev: RegimeModel | None, r, cfg: BacktestConfig) -> RegimeStep:
    W = cfg.window_months
    Xw = F[t - W + 1 : t + 1]
    try:
        model, labels = fit_regimes(Xw, r, cfg.seed, cfg.k_max, previous=prev, n_init=cfg.n_init)
        p_now = classify(model, Xw[-1])
    except (RegimeTaaError, np.linalg.LinAlgError, ValueError) as exc:
        return RegimeStep(t, None, None, None, error=f"{type(exc).__name__}: {exc}")
    return RegimeStep(t, model, labels, p_now)


def regime_path(F: np.ndarray, cfg: BacktestConfig, dates=None) -> list[RegimeStep]:
    """Refit the regime model for every decision month, warm-starting each fit."""
    W = cfg.window_months
    T = F.shape[0]
    steps = []
    prev, r = None, cfg.r
    for t in range(W - 1, T - 1):
        step = _fit_month(t, F, prev, r, cfg)
        if step.model is None:
            when = dates[t].date() if dates is not None else t
            warnings.warn(f"regime fit failed at {when}: {step.error}; month is flat", RuntimeWarning, stacklevel=2)
        else:
            prev = step.model
            if r == "auto":
                r = step.model.r
        steps.append(step)
    return steps


# --------------------------------------------------------------------------- phase 2: strategies


def _forecasts(step: RegimeStep, labels, F, R, cfg: BacktestConfig):
    """Forecast vector per model plus the propagated distribution.  Failed models map to an error string."""
    W, t = cfg.window_months, step.t
    n_reg = step.model.r + 1
    Fw, Rw = F[t - W + 1 : t + 1], R[t - W + 1 : t + 1]
    # short windows often end in a regime never left; the uniform-row fallback is expected here
    with _quiet(transition_logger):
        E = estimate_transition(labels, n_reg, cfg.smoothing_alpha)
    p_next = propagate(step.p_now, E)
    out = {}
    mu = sigma = None
    for name in cfg.models:
        try:
            if name == "naive":
                out[name] = naive_forecast(Rw, labels, p_next, cfg.min_obs)
            elif name == "ridge":
                models, _ = fit_regime_ridge(
                    Fw, Rw, labels, n_reg, cfg.ridge_lambda, cfg.min_obs, cfg.ridge_intercept
                )
                out[name] = ridge_forecast(models, Fw[-1], p_next, cfg.include_regime0)
            else:
                if mu is None:
                    mu, sigma = Rw.mean(axis=0), np.atleast_2d(np.cov(Rw, rowvar=False, ddof=1))
                if name == "bl":
                    q = bl_views(Rw, labels, p_next, cfg.min_obs)
                    out[name] = bl_posterior(mu, sigma, q, cfg.tau)
                else:
                    out[name] = mvo_scores(mu, sigma)
        except (RegimeTaaError, np.linalg.LinAlgError, ValueError) as exc:
            out[name] = f"{type(exc).__name__}: {exc}"
    return E.matrix, p_next, out


def _decide(step: RegimeStep, F, R, cfg: BacktestConfig, transform: LabelTransform | None):
    """Weights per strategy for one decision month.

    Returns ``(weights, flat, failed, state, forecasts)`` where ``state``
    collects every fitted quantity for the audit hash.
    """
    d = R.shape[1]
    names = cfg.strategy_names
    weights = {n: np.zeros(d) for n in names}
    flat = {n: False for n in names}
    failed = {n: False for n in names}
    if step.model is None:
        for n in names:
            failed[n] = True
        return weights, flat, failed, [step.error.encode()], {}

    labels = step.labels if transform is None else np.asarray(transform(step.labels, step.t), dtype=int)
    E, p_next, fc = _forecasts(step, labels, F, R, cfg)
    state = [
        step.model.stage1.centroids, step.model.stage2.centroids, step.labels, labels, step.p_now, E, p_next,
    ]
    for model_name in cfg.models:
        y = fc[model_name]
        legs = [n for n in names if n.startswith(model_name + "_")]
        if isinstance(y, str):
            warnings.warn(f"{model_name} failed at month {step.t}: {y}; legs are flat", RuntimeWarning, stacklevel=3)
            for n in legs:
                failed[n] = True
            state.append(np.frombuffer(y.encode(), dtype=np.uint8))
            continue
        state.append(y)
        for n in legs:
            if n == "bl_raw":
                weights[n] = gross_normalize(y)
                continue
            _, scheme, l = n.rsplit("_", 2)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", FlatPositionWarning)
                weights[n] = size(scheme, y, int(l), p_next)
            flat[n] = any(issubclass(w.category, FlatPositionWarning) for w in caught)
    state.extend(weights[n] for n in names)
    return weights, flat, failed, state, {k: v for k, v in fc.items() if not isinstance(v, str)}


def run_strategies(
    steps: list[RegimeStep],
    dates: pd.DatetimeIndex,
    F: np.ndarray,
    R: np.ndarray,
    tickers: list[str],
    cfg: BacktestConfig,
    transform: LabelTransform | None = None,
    keep_weights: bool = True,
    forecast_log: list | None = None,
) -> dict[str, StrategyResult]:
    """Replay every (model, scheme, l) leg over a precomputed regime path, plus benchmarks.

    When ``forecast_log`` is a list, ``(decision_date, ticker, model, value)``
    rows are appended to it.
    """
    names = cfg.strategy_names
    n_out = len(steps)
    rets = {n: np.zeros(n_out) for n in names}
    wts = {n: np.zeros((n_out, R.shape[1])) for n in names}
    n_flat = {n: 0 for n in names}
    n_fail = {n: 0 for n in names}
    for i, step in enumerate(steps):
        weights, flat, failed, _, fc = _decide(step, F, R, cfg, transform)
        if forecast_log is not None:
            for model_name, y in fc.items():
                forecast_log.extend((dates[step.t], tk, model_name, float(v)) for tk, v in zip(tickers, y))
        r_next = R[step.t + 1]
        for n in names:
            wts[n][i] = weights[n]
            rets[n][i] = weights[n] @ r_next
            n_flat[n] += flat[n]
            n_fail[n] += failed[n]

    out_dates = dates[[s.t + 1 for s in steps]]
    results = {
        n: StrategyResult(n, out_dates, rets[n], wts[n] if keep_weights else None, n_flat[n], n_fail[n])
        for n in names
    }
    idx = [s.t + 1 for s in steps]
    if cfg.benchmark_ticker not in tickers:
        raise ConfigError(f"benchmark ticker {cfg.benchmark_ticker!r} not in asset panel")
    j = tickers.index(cfg.benchmark_ticker)
    results["spy"] = StrategyResult("spy", out_dates, R[idx, j].copy())
    results["ew"] = StrategyResult("ew", out_dates, R[idx].mean(axis=1))
    return results


def _audit(steps, dates, F, R, cfg: BacktestConfig) -> list[AuditRecord]:
    """Rerun each month on data whose future rows are poisoned and compare state hashes."""
    W = cfg.window_months
    records = []
    prev = None
    r = cfg.r
    for step in steps:
        t = step.t
        Fp, Rp = F.copy(), R.copy()
        Fp[t + 1 :] = np.nan
        Rp[t + 1 :] = np.nan
        redo = _fit_month(t, Fp, prev, r, cfg)
        state = _decide(step, F, R, cfg, None)[3]
        state_p = _decide(redo, Fp, Rp, cfg, None)[3]
        records.append(
            AuditRecord(
                date=dates[t],
                train_start=dates[t - W + 1],
                train_end=dates[t],
                slice_hash=_digest(F[t - W + 1 : t + 1], R[t - W + 1 : t + 1]),
                state_hash=_digest(*state),
                poisoned_state_hash=_digest(*state_p),
            )
        )
        if step.model is not None:
            prev = step.model
            if r == "auto":
                r = step.model.r
    return records


def walk_forward(factors: FactorPanel, assets: AssetPanel, cfg: BacktestConfig | None = None) -> BacktestResult:
    """Run the treatment backtest (actual regime labels).

    Returns one :class:`StrategyResult` per ``model_scheme_l`` leg plus the
    ``spy`` buy-and-hold and ``ew`` equal-weight benchmarks.  With
    ``cfg.audit`` every month is recomputed on a copy of the data whose rows
    after the decision month are NaN; the fitted state must hash identically.
    """
    cfg = cfg or BacktestConfig()
    dates, F, R = align(factors, assets, cfg.window_months)
    tickers = list(assets.tickers)
    if cfg.benchmark_ticker not in tickers:
        raise ConfigError(f"benchmark ticker {cfg.benchmark_ticker!r} not in asset panel")
    steps = regime_path(F, cfg, dates)
    log = []
    strategies = run_strategies(steps, dates, F, R, tickers, cfg, forecast_log=log)
    result = BacktestResult(strategies, steps, tickers, cfg)
    result.forecasts = pd.DataFrame(log, columns=["date", "ticker", "model", "value"])
    if cfg.audit:
        result.audit = _audit(steps, dates, F, R, cfg)
        bad = [a.date.date() for a in result.audit if not a.ok]
        if bad:
            logger.error("lookahead audit failed for months %s", bad)
    return result


# --------------------------------------------------------------------------- controls and comparison


@dataclass
class ComparisonReport:
    """Treatment vs control metric values per strategy block, with test results.

    ``comparisons[family][metric]`` holds the block names, the control and
    treatment values and the t-test / Nemenyi results.  Families are the
    label-driven models (controls average over the random-label runs) and
    ``bl_vs_mvo`` (control = mvo leg, treatment = matching bl leg).
    """

    n_controls: int
    control_mode: str
    seed: int
    comparisons: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (list, tuple, np.ndarray)):
                return [clean(v) for v in x]
            if isinstance(x, (bool, np.bool_)):
                return bool(x)
            if isinstance(x, (float, np.floating)):
                return float(x) if np.isfinite(x) else None
            if isinstance(x, np.integer):
                return int(x)
            return x

        return clean(
            {"n_controls": self.n_controls, "control_mode": self.control_mode, "seed": self.seed,
             "comparisons": self.comparisons}
        )


def _control_transform(cfg: BacktestConfig, c: int) -> LabelTransform:
    # seeded per (run seed, control index, month) so legs never share draws
    def transform(labels, t):
        return random_regime_control(labels, [cfg.seed, c, t], cfg.control_mode)

    return transform


def _compare(blocks, control, treatment) -> dict:
    c = np.asarray(control, dtype=float)
    t = np.asarray(treatment, dtype=float)
    entry = {"blocks": list(blocks), "control": c.tolist(), "treatment": t.tolist()}
    finite = np.isfinite(c) & np.isfinite(t)
    if finite.sum() >= 2:
        tt = paired_t_test(c[finite], t[finite])
        entry["t_test"] = {"statistic": tt.statistic, "pvalue": tt.pvalue, "df": tt.df, "degenerate": tt.degenerate}
    else:
        entry["t_test"] = None
    if len(c):
        ne = nemenyi_test(np.nan_to_num(c, posinf=1e300, neginf=-1e300), np.nan_to_num(t, posinf=1e300, neginf=-1e300))
        entry["nemenyi"] = {
            "control_rank": ne.control_rank, "treatment_rank": ne.treatment_rank,
            "statistic": ne.statistic, "pvalue": ne.pvalue,
        }
    return entry


def run_comparison(
    factors: FactorPanel,
    assets: AssetPanel,
    cfg: BacktestConfig | None = None,
    treatment: BacktestResult | None = None,
) -> tuple[BacktestResult, list[dict[str, StrategyResult]], ComparisonReport]:
    """Treatment backtest plus ``cfg.n_controls`` random-label replays.

    Controls reuse the treatment's regime path; only the window label series
    fed to the transition matrix and the forecast models is randomized.
    """
    cfg = cfg or BacktestConfig()
    dates, F, R = align(factors, assets, cfg.window_months)
    if treatment is None:
        treatment = walk_forward(factors, assets, cfg)
    tickers = treatment.tickers
    controls = [
        run_strategies(treatment.steps, dates, F, R, tickers, cfg, _control_transform(cfg, c), keep_weights=False)
        for c in range(cfg.n_controls)
    ]

    report = ComparisonReport(cfg.n_controls, cfg.control_mode, cfg.seed)
    for family in [m for m in cfg.models if m in LABEL_MODELS]:
        blocks = [f"{family}_{s}_{l}" for s in cfg.schemes for l in cfg.l_values]
        report.comparisons[family] = {}
        for metric in COMPARED_METRICS:
            treat = [getattr(treatment[b].metrics, metric) for b in blocks]
            if controls:
                per_seed = np.array([[getattr(ctrl[b].metrics, metric) for b in blocks] for ctrl in controls])
                ctrl_mean = per_seed.mean(axis=0)
            else:
                per_seed, ctrl_mean = np.empty((0, len(blocks))), np.full(len(blocks), np.nan)
            entry = _compare(blocks, ctrl_mean, treat)
            entry["control_runs"] = per_seed.tolist()
            report.comparisons[family][metric] = entry
    if "bl" in cfg.models and "mvo" in cfg.models:
        report.comparisons["bl_vs_mvo"] = {}
        for metric in COMPARED_METRICS:
            pairs = [(s, l) for s in cfg.schemes for l in cfg.l_values]
            ctrl = [getattr(treatment[f"mvo_{s}_{l}"].metrics, metric) for s, l in pairs]
            treat = [getattr(treatment[f"bl_{s}_{l}"].metrics, metric) for s, l in pairs]
            report.comparisons["bl_vs_mvo"][metric] = _compare([f"{s}_{l}" for s, l in pairs], ctrl, treat)
    return treatment, controls, report


# --------------------------------------------------------------------------- tables


def metrics_table(strategies: dict[str, StrategyResult]) -> pd.DataFrame:
    """One row per strategy, columns laid out like the published result tables plus AvgDD."""
    rows = []
    for name, res in strategies.items():
        m = res.metrics
        rows.append(
            {"Model": name, "Sharpe": m.sharpe, "Sortino": m.sortino, "MaxDD": m.max_dd,
             "% Positive Ret.": m.pct_positive * 100.0, "AvgDD": m.avg_dd}
        )
    return pd.DataFrame(rows)


def weights_table(strategies: dict[str, StrategyResult], tickers: list[str]) -> pd.DataFrame:
    """Long format ``date, strategy, ticker, weight``; ``date`` is the decision month."""
    frames = []
    for name, s in strategies.items():
        if s.weights is None:
            continue
        decided = s.dates - pd.DateOffset(months=1)
        frames.append(
            pd.DataFrame({
                "date": np.repeat(decided, len(tickers)),
                "strategy": name,
                "ticker": np.tile(tickers, len(decided)),
                "weight": s.weights.ravel(),
            })
        )
    return pd.concat(frames, ignore_index=True)


def returns_table(strategies: dict[str, StrategyResult]) -> pd.DataFrame:
    first = next(iter(strategies.values()))
    frame = pd.DataFrame({n: s.monthly_returns for n, s in strategies.items()}, index=first.dates)
    frame.index.name = "date"
    return frame


def cumulative_table(strategies: dict[str, StrategyResult], target_annual: float | None = 0.10) -> pd.DataFrame:
    """Cumulative log returns per strategy, volatility-scaled ex post when possible.

    Series that cannot be scaled (constant, or shorter than a year) are left unscaled.
    """
    first = next(iter(strategies.values()))
    cols = {}
    for name, s in strategies.items():
        r = s.monthly_returns
        if target_annual is not None and len(r) >= 12 and r.std(ddof=1) > 0:
            r = vol_scale(r, target_annual)
        cols[name] = cumulative_log_returns(r)
    frame = pd.DataFrame(cols, index=first.dates)
    frame.index.name = "date"
    return frame
