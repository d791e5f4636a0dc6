"""Command-line front end: ``regime-taa {ingest,regimes,backtest,report}``.

Runs are driven by an INI config file; command-line flags override it.
Without any paths the bundled synthetic fixture is used.  Errors print one
line ``error CODE: message`` to stderr and exit with 2 (config), 3 (data)
or 4 (numerical).

Config schema (every key optional, defaults shown)::

    [paths]
    macro =                 ; FRED-MD style CSV (default: bundled fixture)
    groups =                ; series_id,group_id CSV (default: bundled fixture)
    assets =                ; date + one column of monthly simple returns per ticker
    out = out               ; output directory

    [ingest]
    variance_threshold = 0.95
    excluded_groups = 6     ; comma separated
    max_missing_frac = 0.2

    [regimes]
    r = 5                   ; integer or auto
    k_max = 10
    n_init = 10
    seed = 0
    gmm = false

    [backtest]
    window_months = 48
    l_values = 2,3,4
    schemes = lns,los,lo,mx
    models = naive,bl,ridge,mvo
    vol_target_annual = 0.10
    smoothing_alpha = 0
    ridge_lambda = 1.0
    ridge_intercept = false
    include_regime0 = true
    min_obs = 3
    tau = 0.05
    bl_raw_weights = false
    benchmark_ticker = SPY
    n_controls = 20
    control_mode = permute  ; or iid
    audit = false
    svg = false
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import io
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .backtest import (
    BacktestConfig,
    cumulative_table,
    metrics_table,
    returns_table,
    run_comparison,
    weights_table,
)
from .errors import ConfigError, DataError, RegimeTaaError
from .fixtures import fixture_path
from .forecast import AssetPanel
from .ingest import build_factor_panel, drop_sparse_columns, exclude_group, parse_fred_md, read_group_map, standardize, transform_panel
from .regimes import classify_many, crisis_probability, fit_gmm, fit_regimes, gmm_crisis_component, regime_profile
from .svg import line_chart
from .transition import conditional_transition, estimate_transition, export_graph, matrix_to_csv

logger = logging.getLogger("regime_taa")

DEFAULTS = {
    "paths": {"macro": "", "groups": "", "assets": "", "out": "out"},
    "ingest": {"variance_threshold": "0.95", "excluded_groups": "6", "max_missing_frac": "0.2"},
    "regimes": {"r": "5", "k_max": "10", "n_init": "10", "seed": "0", "gmm": "false"},
    "backtest": {
        "window_months": "48", "l_values": "2,3,4", "schemes": "lns,los,lo,mx",
        "models": "naive,bl,ridge,mvo", "vol_target_annual": "0.10", "smoothing_alpha": "0",
        "ridge_lambda": "1.0", "ridge_intercept": "false", "include_regime0": "true",
        "min_obs": "3", "tau": "0.05", "bl_raw_weights": "false", "benchmark_ticker": "SPY",
        "n_controls": "20", "control_mode": "permute", "audit": "false", "svg": "false",
    },
}


# --------------------------------------------------------------------------- config


def load_config(path=None, overrides: dict | None = None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cfg.read_dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            cfg.read(p)
        except configparser.Error as exc:
            raise ConfigError(f"{p}: {exc}".replace("\n", " ")) from None
    for (section, key), value in (overrides or {}).items():
        if value is not None:
            cfg[section][key] = str(value)
    return cfg


def _get(cfg, section, key, kind=str):
    raw = cfg[section][key].strip()
    try:
        if kind is bool:
            return cfg[section].getboolean(key)
        if kind in (int, float):
            return kind(raw)
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind == "list":
            return tuple(v.strip() for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {getattr(kind, '__name__', kind)}") from None
    return raw


def _r_value(cfg):
    raw = cfg["regimes"]["r"].strip().lower()
    if raw == "auto":
        return "auto"
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[regimes] r = {raw!r} must be an integer or auto") from None


def backtest_config(cfg) -> BacktestConfig:
    return BacktestConfig(
        window_months=_get(cfg, "backtest", "window_months", int),
        l_values=_get(cfg, "backtest", "l_values", "ints"),
        schemes=_get(cfg, "backtest", "schemes", "list"),
        models=_get(cfg, "backtest", "models", "list"),
        vol_target_annual=_get(cfg, "backtest", "vol_target_annual", float),
        seed=_get(cfg, "regimes", "seed", int),
        smoothing_alpha=_get(cfg, "backtest", "smoothing_alpha", float),
        r=_r_value(cfg),
        k_max=_get(cfg, "regimes", "k_max", int),
        n_init=_get(cfg, "regimes", "n_init", int),
        ridge_lambda=_get(cfg, "backtest", "ridge_lambda", float),
        ridge_intercept=_get(cfg, "backtest", "ridge_intercept", bool),
        include_regime0=_get(cfg, "backtest", "include_regime0", bool),
        min_obs=_get(cfg, "backtest", "min_obs", int),
        tau=_get(cfg, "backtest", "tau", float),
        bl_raw_weights=_get(cfg, "backtest", "bl_raw_weights", bool),
        benchmark_ticker=_get(cfg, "backtest", "benchmark_ticker"),
        n_controls=_get(cfg, "backtest", "n_controls", int),
        control_mode=_get(cfg, "backtest", "control_mode"),
        audit=_get(cfg, "backtest", "audit", bool),
    )


def _read_input(cfg, kind) -> str:
    path = cfg["paths"][kind].strip()
    if not path:
        return fixture_path(kind).read_text()
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{kind} file not found: {p}")
    return p.read_text()


def _out_dir(cfg) -> Path:
    out = Path(cfg["paths"]["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _write(path: Path, text: str):
    path.write_text(text, newline="")
    return path.name


def _csv(frame: pd.DataFrame, index=True) -> str:
    return frame.to_csv(index=index, lineterminator="\n", date_format="%Y-%m-%d")


def _manifest(out: Path, command: str, cfg, files: list[str]):
    """Timestamps live only here so every other file is reproducible byte for byte."""
    doc = {
        "command": command,
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "files": sorted(files),
        "config": {s: dict(cfg[s]) for s in cfg.sections()},
    }
    (out / "run_manifest.json").write_text(json.dumps(doc, indent=2) + "\n")


# --------------------------------------------------------------------------- commands


def _parse(cfg, kind, parser):
    text = _read_input(cfg, kind)
    try:
        return parser(text)
    except DataError as exc:
        where = cfg["paths"][kind].strip() or fixture_path(kind).name
        raise type(exc)(f"{where}: {exc}") from None


def _factors(cfg):
    groups = _parse(cfg, "groups", read_group_map)
    panel = _parse(cfg, "macro", lambda text: parse_fred_md(text, groups))
    excluded = _get(cfg, "ingest", "excluded_groups", "ints")
    model, factors, report = build_factor_panel(
        panel,
        _get(cfg, "ingest", "variance_threshold", float),
        excluded,
        _get(cfg, "ingest", "max_missing_frac", float),
    )
    return panel, model, factors, report


def cmd_ingest(cfg) -> list[str]:
    out = _out_dir(cfg)
    _, model, factors, report = _factors(cfg)
    logger.info("kept %d components; cumulative ratio %.6f", report.n_kept, report.cumulative_ratio[report.n_kept - 1])
    n = len(model.explained_variance_ratio)
    curve = pd.DataFrame(
        {
            "component": np.arange(1, n + 1),
            "explained_variance_ratio": model.explained_variance_ratio,
            "cumulative_ratio": model.cumulative_ratio,
            "kept": np.arange(n) < model.n_kept,
        }
    )
    summary = {
        "n_series_raw": report.n_series_raw,
        "n_series_after_exclusion": report.n_series_after_exclusion,
        "n_series_used": report.n_series_used,
        "dropped_sparse": report.dropped_sparse,
        "n_months": report.n_months,
        "n_kept": report.n_kept,
        "first_month": str(factors.dates[0].date()),
        "last_month": str(factors.dates[-1].date()),
    }
    return [
        _write(out / "factors.csv", factors.to_csv(lineterminator="\n")),
        _write(out / "pca_curve.csv", _csv(curve, index=False)),
        _write(out / "ingest_report.json", json.dumps(summary, indent=2) + "\n"),
    ]


def cmd_regimes(cfg) -> list[str]:
    out = _out_dir(cfg)
    panel, _, factors, _ = _factors(cfg)
    seed = _get(cfg, "regimes", "seed", int)
    model, labels = fit_regimes(
        factors.factors, _r_value(cfg), seed, _get(cfg, "regimes", "k_max", int),
        n_init=_get(cfg, "regimes", "n_init", int),
    )
    n_reg = model.r + 1
    dist = classify_many(model, factors.factors)
    E = estimate_transition(labels, n_reg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        C = conditional_transition(E)

    lab = pd.DataFrame({"label": labels}, index=factors.dates)
    lab.index.name = "date"
    probs = pd.DataFrame(dist, index=factors.dates, columns=[f"p{i}" for i in range(n_reg)])
    probs.index.name = "date"

    # profile the standardized series the factors were built from
    std = panel
    for g in _get(cfg, "ingest", "excluded_groups", "ints"):
        std = exclude_group(std, g)
    std, _ = drop_sparse_columns(transform_panel(std), _get(cfg, "ingest", "max_missing_frac", float))
    std = standardize(std)
    profile = regime_profile(std.data, pd.Series(labels, index=factors.dates), std.series_ids, n_reg)
    profile.index.name = "series"

    files = [
        _write(out / "regime_labels.csv", _csv(lab)),
        _write(out / "regime_distributions.csv", _csv(probs)),
        _write(out / "transition.csv", matrix_to_csv(E)),
        _write(out / "transition_conditional.csv", matrix_to_csv(C)),
        _write(out / "regime_graph.dot", export_graph(C)),
        _write(out / "regime_profile.csv", _csv(profile)),
    ]
    if _get(cfg, "regimes", "gmm", bool):
        gmm = fit_gmm(factors.factors, n_reg, seed=seed)
        crisis = gmm_crisis_component(gmm)
        comp = pd.DataFrame(
            {
                "two_stage_label": labels,
                "two_stage_crisis_prob": crisis_probability(dist),
                "gmm_component": np.argmax(gmm.responsibilities, axis=1),
                "gmm_crisis_prob": gmm.responsibilities[:, crisis],
            },
            index=factors.dates,
        )
        comp.index.name = "date"
        files.append(_write(out / "gmm_comparison.csv", _csv(comp)))
    return files


def cmd_backtest(cfg) -> list[str]:
    out = _out_dir(cfg)
    bcfg = backtest_config(cfg)
    _, _, factors, _ = _factors(cfg)
    assets = AssetPanel.from_csv(io.StringIO(_read_input(cfg, "assets")))
    treatment, _, report = run_comparison(factors, assets, bcfg)

    strategies = treatment.strategies
    cum = cumulative_table(strategies, bcfg.vol_target_annual)
    files = [
        _write(out / "metrics.csv", _csv(metrics_table(strategies), index=False)),
        _write(out / "monthly_returns.csv", _csv(returns_table(strategies))),
        _write(out / "cumulative_log_returns.csv", _csv(cum)),
        _write(out / "weights.csv", _csv(weights_table(strategies, treatment.tickers), index=False)),
        _write(out / "forecasts.csv", _csv(treatment.forecasts, index=False)),
        _write(out / "comparison_report.json", json.dumps(report.to_dict(), indent=2) + "\n"),
    ]
    failed = {n: s.failed_months for n, s in strategies.items() if s.failed_months}
    if failed:
        logger.warning("strategies with flat months after model failures: %s", failed)
    if bcfg.audit:
        audit = pd.DataFrame(
            [
                {"date": a.date, "train_start": a.train_start, "train_end": a.train_end,
                 "slice_hash": a.slice_hash, "state_hash": a.state_hash, "ok": a.ok}
                for a in treatment.audit
            ]
        )
        files.append(_write(out / "audit.csv", _csv(audit, index=False)))
        if not treatment.audit_passed:
            raise RegimeTaaError("lookahead audit failed; see audit.csv")
    if _get(cfg, "backtest", "svg", bool):
        keep = [c for c in cum.columns if c in ("spy", "ew") or c.endswith("_lo_3")]
        files.append(_write(out / "cumulative_log_returns.svg", line_chart(cum[keep], "Cumulative log returns")))
    return files


def lo_vs_lns(metrics: pd.DataFrame) -> pd.DataFrame:
    """For each model family and l, does the long-only leg beat long-and-short on Sharpe?"""
    rows = []
    by_name = metrics.set_index("Model")
    for name in by_name.index:
        parts = name.split("_")
        if len(parts) != 3 or parts[1] != "lo":
            continue
        twin = f"{parts[0]}_lns_{parts[2]}"
        if twin in by_name.index:
            rows.append(
                {"family": parts[0], "l": int(parts[2]), "lo_sharpe": by_name.at[name, "Sharpe"],
                 "lns_sharpe": by_name.at[twin, "Sharpe"],
                 "lo_dominates": bool(by_name.at[name, "Sharpe"] > by_name.at[twin, "Sharpe"])}
            )
    return pd.DataFrame(rows)


def cmd_report(cfg) -> list[str]:
    """Summarize a backtest output directory as ``report.md``."""
    out = Path(cfg["paths"]["out"])
    mpath, cpath = out / "metrics.csv", out / "comparison_report.json"
    for p in (mpath, cpath):
        if not p.is_file():
            raise DataError(f"{p} not found; run the backtest command first")
    table = pd.read_csv(mpath)
    comp = json.loads(cpath.read_text())

    lines = ["# Backtest report", "", "## Strategy metrics", ""]
    cols = ["Model", "Sharpe", "Sortino", "MaxDD", "% Positive Ret."]
    lines.append("| " + " | ".join(cols) + " |")
    lines.append("|" + "---|" * len(cols))
    for _, row in table.iterrows():
        lines.append(f"| {row['Model']} | {row['Sharpe']:.3f} | {row['Sortino']:.3f} | {row['MaxDD']:.2f} | {row['% Positive Ret.']:.1f} |")

    lines += ["", f"## Actual vs random regimes ({comp['n_controls']} controls, {comp['control_mode']})", ""]
    lines.append("| Comparison | Metric | Control rank | Treatment rank | Nemenyi p | t-test p |")
    lines.append("|---|---|---|---|---|---|")
    for family, per_metric in comp["comparisons"].items():
        for metric, entry in per_metric.items():
            ne, tt = entry.get("nemenyi") or {}, entry.get("t_test") or {}
            fmt = lambda v: "n/a" if v is None else f"{v:.3f}"  # noqa: E731
            lines.append(
                f"| {family} | {metric} | {fmt(ne.get('control_rank'))} | {fmt(ne.get('treatment_rank'))} "
                f"| {fmt(ne.get('pvalue'))} | {fmt(tt.get('pvalue'))} |"
            )

    dom = lo_vs_lns(table)
    lines += ["", "## Long-only vs long-and-short (Sharpe)", ""]
    for family, grp in dom.groupby("family", sort=False):
        lines.append(f"- {family}: lo beats lns for l in {sorted(grp.loc[grp.lo_dominates, 'l'].tolist())} of {sorted(grp.l.tolist())}")
    return [_write(out / "report.md", "\n".join(lines) + "\n")]


COMMANDS = {"ingest": cmd_ingest, "regimes": cmd_regimes, "backtest": cmd_backtest, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regime-taa", description="Macro regime detection and regime-driven asset allocation.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--seed", type=int, help="random seed (overrides [regimes] seed)")
    parser.add_argument("--out", help="output directory (overrides [paths] out)")
    parser.add_argument("--svg", action="store_true", help="also write an SVG chart of cumulative log returns")
    parser.add_argument("--gmm", action="store_true", help="add the Gaussian mixture comparison to the regimes output")
    parser.add_argument("--controls", type=int, metavar="N", help="number of random-regime control runs")
    parser.add_argument("--macro", help="FRED-MD style macro CSV")
    parser.add_argument("--groups", help="series group map CSV")
    parser.add_argument("--assets", help="monthly asset returns CSV")
    parser.add_argument("--audit", action="store_true", help="run the no-lookahead audit during the backtest")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def main(argv=None) -> int:
    parser = build_parser()
    parser.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print(f"error CONFIG_ERROR: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = {
        ("regimes", "seed"): args.seed,
        ("paths", "out"): args.out,
        ("paths", "macro"): args.macro,
        ("paths", "groups"): args.groups,
        ("paths", "assets"): args.assets,
        ("backtest", "n_controls"): args.controls,
        ("backtest", "svg"): "true" if args.svg else None,
        ("backtest", "audit"): "true" if args.audit else None,
        ("regimes", "gmm"): "true" if args.gmm else None,
    }
    try:
        cfg = load_config(args.config, overrides)
        files = COMMANDS[args.command](cfg)
        if args.command != "report":
            _manifest(Path(cfg["paths"]["out"]), args.command, cfg, files)
    except RegimeTaaError as exc:
        msg = " ".join(str(exc).split())
        print(f"error {exc.code}: {msg}", file=sys.stderr)
        return exc.exit_code
    for name in files:
        print(name)
    return 0


if __name__ == "__main__":
    sys.exit(main())
