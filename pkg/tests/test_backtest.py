import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from oracles import student_t_sf
from regime_taa.backtest import (
    BacktestConfig,
    align,
    cumulative_log_returns,
    cumulative_table,
    drawdowns,
    metrics,
    metrics_table,
    nemenyi_test,
    paired_t_test,
    random_regime_control,
    returns_table,
    run_comparison,
    run_strategies,
    vol_scale,
    walk_forward,
    weights_table,
)
from regime_taa.errors import ConfigError, DegenerateError
from regime_taa.forecast import AssetPanel
from regime_taa.ingest import FactorPanel

FAST = dict(l_values=(2,), schemes=("lns", "lo"), n_init=3)


def _slice_factors(factors, n):
    return FactorPanel(factors.dates[:n], factors.factors[:n])


# --------------------------------------------------------------------------- metrics


def test_metric_examples():
    assert metrics([0.01, -0.01]).sharpe == 0.0
    assert metrics([0.10, -0.20]).max_dd == pytest.approx(-20.0)
    m = metrics([0.01, 0.02, 0.03])
    assert m.pct_positive == 1.0 and m.max_dd == 0.0 and m.sortino == np.inf
    with pytest.raises(DegenerateError):
        metrics([0.01, 0.01])
    with pytest.raises(ConfigError):
        metrics([0.01])
    zero = metrics([0.0, 0.0, 0.0], strict=False)
    assert zero.sharpe == 0.0 and zero.sortino == 0.0 and zero.max_dd == 0.0


def test_metric_formulas_by_hand():
    r = np.array([0.02, -0.01, 0.03, -0.02, 0.01])
    m = metrics(r)
    assert m.sharpe == pytest.approx(r.mean() / r.std(ddof=1) * np.sqrt(12), rel=1e-14)
    down = np.sqrt(np.mean(np.minimum(r, 0) ** 2))
    assert m.sortino == pytest.approx(r.mean() / down * np.sqrt(12), rel=1e-14)
    wealth = np.cumprod(1 + r)
    dd = [w / max(1.0, wealth[: i + 1].max()) - 1 for i, w in enumerate(wealth)]
    assert m.avg_dd == pytest.approx(100 * np.mean(dd), rel=1e-12)
    assert m.max_dd == pytest.approx(100 * min(dd), rel=1e-12)
    assert m.pct_positive == pytest.approx(0.6)
    np.testing.assert_allclose(drawdowns([-0.1]), [-0.1])


def test_vol_scale():
    rng = np.random.default_rng(0)
    r = rng.standard_normal(60)
    r = r / r.std(ddof=1) * 0.20 / np.sqrt(12)
    np.testing.assert_allclose(vol_scale(r, 0.10), r / 2, rtol=1e-12)
    np.testing.assert_allclose(vol_scale(r / 2, 0.10), r / 2, rtol=1e-12)
    assert vol_scale(r, 0.07).std(ddof=1) * np.sqrt(12) == pytest.approx(0.07, abs=1e-9)
    with pytest.raises(ConfigError):
        vol_scale(r[:11])
    with pytest.raises(DegenerateError):
        vol_scale(np.zeros(12))
    np.testing.assert_allclose(cumulative_log_returns([0.1, -0.1]), np.cumsum(np.log([1.1, 0.9])))


@settings(max_examples=60)
@given(arrays(float, st.integers(12, 60), elements=st.floats(-0.3, 0.3)), st.floats(0.01, 0.5))
def test_vol_scale_hits_target_and_keeps_sharpe(r, target):
    if r.std(ddof=1) < 1e-6:
        return
    s = vol_scale(r, target)
    assert s.std(ddof=1) * np.sqrt(12) == pytest.approx(target, rel=1e-9)
    assert metrics(s, strict=False).sharpe == pytest.approx(metrics(r, strict=False).sharpe, rel=1e-9, abs=1e-12)


# --------------------------------------------------------------------------- statistics


def test_control_permutation():
    labels = np.repeat([0, 1, 2, 3], 25)
    a = random_regime_control(labels, 7)
    assert sorted(a) == sorted(labels)
    np.testing.assert_array_equal(a, random_regime_control(labels, 7))
    iid = random_regime_control(labels, 7, "iid", n_regimes=6)
    assert iid.min() >= 0 and iid.max() <= 5
    with pytest.raises(ConfigError):
        random_regime_control(labels, 7, "shuffle")


def test_control_destroys_persistence():
    rng = np.random.default_rng(0)
    spells = np.repeat(rng.integers(0, 6, 60), rng.integers(5, 15, 60))[:500]
    assert np.corrcoef(spells[:-1], spells[1:])[0, 1] > 0.5
    rhos = []
    for seed in range(100):
        p = random_regime_control(spells, seed).astype(float)
        rhos.append(np.corrcoef(p[:-1], p[1:])[0, 1])
    assert abs(np.mean(rhos)) < 0.1
    assert np.max(np.abs(rhos)) < 0.2


def test_t_test_examples():
    same = paired_t_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert same.statistic == 0.0 and same.pvalue == 0.5 and same.degenerate
    assert paired_t_test([0.0] * 4, [1.0] * 4).degenerate
    d = np.array([0.5, 0.2, 0.9, 0.4])
    res = paired_t_test(np.zeros(4), d)
    t = d.mean() / (d.std(ddof=1) / 2)
    assert res.statistic == pytest.approx(t, rel=1e-14)
    assert res.pvalue == pytest.approx(student_t_sf(t, 3), abs=1e-6)
    with pytest.raises(ConfigError):
        paired_t_test([1.0], [2.0])


@settings(max_examples=40)
@given(arrays(float, st.integers(3, 15), elements=st.floats(-2, 2)))
def test_t_test_matches_quadrature(d):
    if d.std(ddof=1) < 1e-6:
        return
    res = paired_t_test(np.zeros_like(d), d)
    assert res.pvalue == pytest.approx(student_t_sf(res.statistic, len(d) - 1), abs=1e-6)


def test_nemenyi_rank_patterns():
    c, t = np.zeros(12), np.ones(12)
    res = nemenyi_test(c, t)
    assert (round(res.control_rank, 3), round(res.treatment_rank, 3)) == (1.0, 2.0)
    t2 = t.copy()
    t2[0] = -1
    res = nemenyi_test(c, t2)
    assert (round(res.control_rank, 3), round(res.treatment_rank, 3)) == (1.083, 1.917)
    tied = nemenyi_test(c, c)
    assert (tied.control_rank, tied.treatment_rank) == (1.5, 1.5) and tied.pvalue >= 0.99
    # max drawdown: less negative wins
    dd = nemenyi_test([-30.0, -20.0], [-10.0, -25.0])
    assert dd.treatment_rank == 1.5


@settings(max_examples=60)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_nemenyi_pvalue_against_studentized_range(n, seed):
    rng = np.random.default_rng(seed)
    c, t = rng.standard_normal(n), rng.standard_normal(n)
    res = nemenyi_test(c, t)
    assert 1.0 <= res.control_rank <= 2.0 and res.control_rank + res.treatment_rank == pytest.approx(3.0)
    q = abs(res.treatment_rank - res.control_rank) / np.sqrt(2 * 3 / (6.0 * n)) * np.sqrt(2)
    assert res.pvalue == pytest.approx(sps.studentized_range.sf(q, 2, np.inf), abs=1e-7)


# --------------------------------------------------------------------------- walk-forward


def test_config_validation():
    for bad in (dict(window_months=11), dict(vol_target_annual=0.0), dict(schemes=("xx",)), dict(models=("svm",)),
                dict(r=0), dict(l_values=(0,)), dict(control_mode="x")):
        with pytest.raises(ConfigError):
            BacktestConfig(**bad)
    assert len(BacktestConfig().strategy_names) == 4 * 4 * 3
    assert BacktestConfig(bl_raw_weights=True).strategy_names[-1] == "bl_raw"


def test_sixty_months_gives_twelve_returns(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    res = walk_forward(_slice_factors(factors, 60), fixture_assets, BacktestConfig(**FAST))
    assert set(res.names) == set(BacktestConfig(**FAST).strategy_names) | {"spy", "ew"}
    for s in res.strategies.values():
        assert len(s.monthly_returns) == 12
    assert res.strategies["spy"].dates[0] == factors.dates[48]


def test_insufficient_history(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    with pytest.raises(ConfigError, match="insufficient history"):
        walk_forward(_slice_factors(factors, 48), fixture_assets, BacktestConfig(**FAST))


def test_spy_only_panel_ew_equals_spy(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    spy = AssetPanel(fixture_assets.returns[["SPY"]])
    res = walk_forward(_slice_factors(factors, 60), spy, BacktestConfig(**FAST))
    np.testing.assert_array_equal(res["ew"].monthly_returns, res["spy"].monthly_returns)


def test_zero_returns_everything_zero(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    zero = AssetPanel(fixture_assets.returns * 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = walk_forward(_slice_factors(factors, 60), zero, BacktestConfig(**FAST))
    for s in res.strategies.values():
        assert not s.monthly_returns.any()
        m = s.metrics
        assert (m.sharpe, m.sortino, m.max_dd, m.avg_dd, m.pct_positive) == (0.0, 0.0, 0.0, 0.0, 0.0)
    table = metrics_table(res.strategies)
    assert (table["Sharpe"] == 0).all()


@pytest.fixture(scope="module")
def fixture_run(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    cfg = BacktestConfig(n_controls=3, audit=True)
    return run_comparison(factors, fixture_assets, cfg), cfg


def test_fixture_backtest_shape_and_audit(fixture_run, fixture_assets):
    (treatment, controls, report), cfg = fixture_run
    assert treatment.audit_passed and len(treatment.audit) == 72
    for s in treatment.strategies.values():
        assert len(s.monthly_returns) == 72
        assert s.failed_months == 0
    assert len(controls) == 3


def test_benchmarks_reproduce(fixture_run, fixture_assets):
    (treatment, _, _), _ = fixture_run
    R = fixture_assets.returns.loc[treatment["ew"].dates]
    month_means = [np.mean(np.array(row)) for row in R.itertuples(index=False)]
    np.testing.assert_array_equal(treatment["ew"].monthly_returns, month_means)
    np.testing.assert_array_equal(treatment["spy"].monthly_returns, R["SPY"].to_numpy())


def test_weights_realize_returns(fixture_run, fixture_assets):
    (treatment, _, _), _ = fixture_run
    R = fixture_assets.returns.loc[treatment["ew"].dates].to_numpy()
    for name in ("naive_lo_2", "ridge_lns_3", "mvo_mx_4", "bl_los_2"):
        s = treatment[name]
        np.testing.assert_allclose(s.monthly_returns, np.einsum("ij,ij->i", s.weights, R), rtol=0, atol=1e-15)
        gross = np.abs(s.weights).sum(axis=1)
        assert np.all((gross == 0) | (np.abs(gross - 1) < 1e-12))
        if "_lo_" in name:
            assert np.all(s.weights >= 0)


def test_metrics_recompute_bit_for_bit(fixture_run):
    (treatment, _, _), _ = fixture_run
    table = metrics_table(treatment.strategies).set_index("Model")
    for name, s in treatment.strategies.items():
        again = metrics(np.array(s.monthly_returns.tolist()), strict=False)
        assert table.loc[name, "Sharpe"] == again.sharpe or (np.isnan(again.sharpe) and np.isnan(table.loc[name, "Sharpe"]))
        assert table.loc[name, "MaxDD"] == again.max_dd


def test_identity_control_equals_treatment(fixture_run, fixture_factors, fixture_assets):
    (treatment, _, _), cfg = fixture_run
    _, factors, _ = fixture_factors
    dates, F, R = align(factors, fixture_assets, cfg.window_months)
    same = run_strategies(treatment.steps, dates, F, R, treatment.tickers, cfg, transform=lambda lab, t: lab)
    for name, s in treatment.strategies.items():
        np.testing.assert_array_equal(same[name].monthly_returns, s.monthly_returns)


def test_mvo_is_label_free(fixture_run):
    (treatment, controls, _), _ = fixture_run
    for ctrl in controls:
        np.testing.assert_array_equal(ctrl["mvo_lo_3"].monthly_returns, treatment["mvo_lo_3"].monthly_returns)
        assert not np.array_equal(ctrl["naive_lo_3"].monthly_returns, treatment["naive_lo_3"].monthly_returns)


def test_comparison_report_structure(fixture_run):
    (_, _, report), cfg = fixture_run
    doc = report.to_dict()
    assert set(doc["comparisons"]) == {"naive", "bl", "ridge", "bl_vs_mvo"}
    entry = doc["comparisons"]["naive"]["sharpe"]
    assert len(entry["blocks"]) == 12 and len(entry["control_runs"]) == 3
    ranks = entry["nemenyi"]
    assert 1 <= ranks["control_rank"] <= 2 and ranks["control_rank"] + ranks["treatment_rank"] == pytest.approx(3)


def test_tables(fixture_run):
    (treatment, _, _), _ = fixture_run
    w = weights_table(treatment.strategies, treatment.tickers)
    assert list(w.columns) == ["date", "strategy", "ticker", "weight"]
    assert w["date"].min() == treatment["ew"].dates[0] - pd.DateOffset(months=1)
    ret = returns_table(treatment.strategies)
    assert ret.shape == (72, 50)
    cum = cumulative_table(treatment.strategies)
    scaled = np.diff(np.r_[0.0, cum["spy"].to_numpy()])
    assert np.expm1(scaled).std(ddof=1) * np.sqrt(12) == pytest.approx(0.10, rel=1e-9)
    assert set(treatment.forecasts["model"]) == {"naive", "bl", "ridge", "mvo"}


def test_walk_forward_deterministic(fixture_factors, fixture_assets):
    _, factors, _ = fixture_factors
    cfg = BacktestConfig(**FAST)
    a = walk_forward(_slice_factors(factors, 70), fixture_assets, cfg)
    b = walk_forward(_slice_factors(factors, 70), fixture_assets, cfg)
    for name in a.names:
        np.testing.assert_array_equal(a[name].monthly_returns, b[name].monthly_returns)
