"""Deterministic synthetic data with a planted regime structure.

The generator writes a FRED-MD formatted macro file, a group map and a
panel of monthly sector ETF returns.  Five typical regimes each switch on
one block of macro series; a handful of crisis months hit every series with
a large common shock, which makes them Euclidean outliers.  Asset means shift with the regime:
each sector has one regime where it leads and one where it lags, so the
unconditional means carry almost no information while regime-conditional
means do.

The frozen copies under ``regime_taa/data`` come from :func:`make_fixture`
with the default arguments; :func:`load_fixture` reads them.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources

import numpy as np
import pandas as pd

__all__ = ["TICKERS", "SERIES", "Fixture", "make_fixture", "write_fixture", "load_fixture", "fixture_path"]

TICKERS = ("SPY", "XLB", "XLE", "XLF", "XLI", "XLK", "XLP", "XLU", "XLV", "XLY")

# (mnemonic, tcode, group); group 6 series are pure noise and excluded at ingest
SERIES = (
    ("RPI", 5, 1),
    ("INDPRO", 5, 1),
    ("IPFINAL", 5, 1),
    ("IPMAT", 5, 1),
    ("CUMFNS", 2, 1),
    ("PAYEMS", 5, 2),
    ("UNRATE", 2, 2),
    ("CE16OV", 5, 2),
    ("CLAIMSx", 5, 2),
    ("AWHMAN", 1, 2),
    ("HOUST", 4, 3),
    ("PERMIT", 4, 3),
    ("DPCERA3M086SBEA", 5, 4),
    ("RETAILx", 5, 4),
    ("AMDMNOx", 5, 4),
    ("M2SL", 6, 5),
    ("BUSLOANS", 6, 5),
    ("NONREVSL", 6, 5),
    ("FEDFUNDS", 2, 6),
    ("GS10", 2, 6),
    ("TB3MS", 2, 6),
    ("EXUSUKx", 5, 6),
    ("CPIAUCSL", 6, 7),
    ("PPICMM", 6, 7),
    ("OILPRICEx", 6, 7),
    ("PCEPI", 6, 7),
    ("S&P 500", 5, 8),
    ("S&P div yield", 2, 8),
    ("VIXCLSx", 1, 8),
    ("CONSPI", 7, 5),
)
SPARSE_SERIES = "CONSPI"

N_LATENT = 5


@dataclass
class Fixture:
    macro_csv: str
    groups_csv: str
    assets_csv: str
    regimes: np.ndarray  # planted labels, one per factor month (0 = crisis)


def _planted_path(rng, n_months, spell, crisis_blocks):
    """Persistent regime path; each new spell goes to the least visited other regime."""
    path = np.empty(n_months, dtype=int)
    visits = np.zeros(N_LATENT + 1)
    t, s = 0, 0
    while t < n_months:
        others = [k for k in range(1, N_LATENT + 1) if k != s]
        fewest = min(visits[k] for k in others)
        s = int(rng.choice([k for k in others if visits[k] == fewest]))
        length = int(rng.integers(spell[0], spell[1] + 1))
        path[t : t + length] = s
        visits[s] += min(length, n_months - t)
        t += length
    for start, length in crisis_blocks:
        path[start : start + length] = 0
    return path


def _invert_tcode(x, tcode, level0):
    """Raw levels whose ``tcode`` transform reproduces ``x`` from row 2 onwards."""
    n = len(x)
    if tcode == 1:
        return x.copy()
    if tcode == 2:
        return level0 + np.concatenate(([0.0], np.cumsum(x[1:])))
    if tcode == 4:
        return np.exp(x)
    if tcode == 5:
        return np.exp(np.log(level0) + np.concatenate(([0.0], np.cumsum(x[1:]))))
    if tcode == 6:
        growth = np.concatenate(([0.0, 0.003], 0.003 + np.cumsum(x[2:])))
        return np.exp(np.log(level0) + np.cumsum(growth))
    if tcode == 7:
        g = np.concatenate(([0.0, 0.003], 0.003 + np.cumsum(x[2:])))
        return level0 * np.cumprod(1.0 + g)
    raise ValueError(f"tcode {tcode} not used by the fixture")


def make_fixture(
    seed: int = 11,
    n_months: int = 120,
    signal: float = 1.0,
    noise: float = 0.3,
    crisis_scale: float = 4.0,
    spell: tuple = (4, 8),
    start: str = "2010-01-01",
) -> Fixture:
    """Build the synthetic macro, group-map and asset files.

    ``n_months`` counts factor months; the macro file carries two extra
    leading rows consumed by the differencing transforms.
    """
    rng = np.random.default_rng(seed)
    n_raw = n_months + 2
    crisis = [(30, 4), (84, 4)]
    path = _planted_path(rng, n_months, spell, crisis)

    # typical months: one latent direction per regime; crisis months: a common shock on every series
    z = np.zeros((n_months, N_LATENT))
    typical = path > 0
    z[typical, path[typical] - 1] = signal
    shock = np.where(path == 0, crisis_scale, 0.0)

    dates = pd.date_range(start, periods=n_raw, freq="MS")
    columns = {}
    block = 0
    for name, tcode, group in SERIES:
        if group == 6:
            x = rng.standard_normal(n_months)
        else:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            x = sign * shock + z[:, block % N_LATENT] + noise * rng.standard_normal(n_months)
            block += 1
        lead = rng.standard_normal(2) * 0.1
        x = np.concatenate((lead, x))
        # bring each transform into its natural units
        unit = {1: 1.0, 2: 0.2, 4: 0.05, 5: 0.004, 6: 0.0005, 7: 0.0005}[tcode]
        level0 = {1: 0.0, 2: 5.0, 4: 0.0, 5: 100.0, 6: 100.0, 7: 100.0}[tcode]
        vals = x * unit
        if tcode == 1:
            vals = vals + 40.0
        elif tcode == 4:
            vals = vals + np.log(1200.0)
        columns[name] = _invert_tcode(vals, tcode, level0)
    raw = pd.DataFrame(columns, index=dates)
    raw.iloc[: int(0.3 * n_raw), raw.columns.get_loc(SPARSE_SERIES)] = np.nan
    raw.iloc[[17, 63], raw.columns.get_loc("HOUST")] = np.nan

    buf = io.StringIO()
    buf.write("sasdate," + ",".join(raw.columns) + "\n")
    buf.write("Transform:," + ",".join(str(t) for _, t, _ in SERIES) + "\n")
    for d, row in zip(dates, raw.to_numpy()):
        cells = ["" if np.isnan(v) else f"{v:.15g}" for v in row]
        buf.write(f"{d.month}/{d.day}/{d.year}," + ",".join(cells) + "\n")
    macro_csv = buf.getvalue()

    groups_csv = "series_id,group_id\n" + "".join(f"{n},{g}\n" for n, _, g in SERIES)

    # regime-conditional asset means: sector (s % 9) + 1 leads in regime s, the next one lags
    n_assets = len(TICKERS)
    mu = np.full((N_LATENT + 1, n_assets), 0.004)
    for s in range(1, N_LATENT + 1):
        lead = 1 + (2 * (s - 1)) % (n_assets - 1)
        lag = 1 + (2 * (s - 1) + 1) % (n_assets - 1)
        mu[s, lead] = 0.035
        mu[s, lag] = -0.025
    mu[0] = -0.04
    mu[0, [TICKERS.index("XLP"), TICKERS.index("XLU")]] = 0.01
    mu[:, 0] = mu[:, 1:].mean(axis=1)
    vol = np.full(n_assets, 0.035)
    vol[0] = 0.02

    asset_dates = dates[2:]
    rets = mu[path] + vol * rng.standard_normal((n_months, n_assets))
    rets[:, 0] = rets[:, 1:].mean(axis=1) + 0.005 * rng.standard_normal(n_months)
    frame = pd.DataFrame(rets, index=asset_dates, columns=list(TICKERS))
    frame.index.name = "date"
    assets_csv = frame.to_csv(date_format="%Y-%m-%d", float_format="%.10f", lineterminator="\n")

    return Fixture(macro_csv, groups_csv, assets_csv, path)


FILES = {"macro": "fixture_macro.csv", "groups": "fixture_groups.csv", "assets": "fixture_assets.csv"}


def write_fixture(directory, fixture: Fixture | None = None) -> None:
    from pathlib import Path

    fixture = fixture or make_fixture()
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / FILES["macro"]).write_text(fixture.macro_csv)
    (directory / FILES["groups"]).write_text(fixture.groups_csv)
    (directory / FILES["assets"]).write_text(fixture.assets_csv)
    np.savetxt(directory / "fixture_planted_regimes.txt", fixture.regimes, fmt="%d")


def fixture_path(kind: str):
    """Path of a bundled fixture file: ``"macro"``, ``"groups"`` or ``"assets"``."""
    return resources.files("regime_taa") / "data" / FILES[kind]


def load_fixture() -> dict[str, str]:
    return {kind: fixture_path(kind).read_text() for kind in FILES}
