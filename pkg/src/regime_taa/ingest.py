"""FRED-MD panel ingestion: parsing, t-code transforms, standardization and PCA.

The pipeline turns a raw FRED-MD style CSV into monthly macroeconomic state
vectors (one row per month) that the regime engine clusters::

    panel = parse_fred_md(text, groups=read_group_map(group_text))
    model, factors, report = build_factor_panel(panel, variance_threshold=0.95)
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DataError,
    DegenerateColumnError,
    DomainError,
    LengthError,
    ParseError,
    ValidationError,
)

logger = logging.getLogger(__name__)

__all__ = [
    "TCODES",
    "LAGS_CONSUMED",
    "MacroPanel",
    "PcaModel",
    "FactorPanel",
    "IngestReport",
    "parse_fred_md",
    "read_group_map",
    "apply_tcode",
    "transform_panel",
    "drop_sparse_columns",
    "standardize",
    "exclude_group",
    "fit_pca",
    "build_factor_panel",
]

TCODES = (1, 2, 3, 4, 5, 6, 7)
# leading observations lost by each transform
LAGS_CONSUMED = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}
# the public appendix lists an eighth group (stock market); 0 marks an unmapped series
VALID_GROUPS = range(0, 9)
TRANSFORM_DROP = 2

_MISSING_TOKENS = {"", "na", "nan", "."}


@dataclass
class MacroPanel:
    """Dated matrix of monthly macro series with per-series t-codes and groups.

    Attributes
    ----------
    data : DataFrame
        Month-start ``DatetimeIndex`` rows, one column per series, NaN for
        missing observations.
    tcodes : dict
        Series id -> transform code in 1..7.
    groups : dict
        Series id -> FRED-MD group id (0 when the series is not in the group map).
    """

    data: pd.DataFrame
    tcodes: dict[str, int]
    groups: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        idx = self.data.index
        if not isinstance(idx, pd.DatetimeIndex):
            raise ValidationError("MacroPanel index must be a DatetimeIndex")
        if len(idx) > 1:
            months = idx.year * 12 + idx.month
            steps = np.diff(np.asarray(months))
            if np.any(steps != 1):
                bad = int(np.argmax(steps != 1)) + 1
                raise ValidationError(
                    f"dates must be strictly increasing with monthly spacing "
                    f"(break at {idx[bad].date()})"
                )
        for col in self.data.columns:
            if col not in self.tcodes:
                raise ValidationError(f"series {col!r} has no tcode")
            if self.tcodes[col] not in TCODES:
                raise ValidationError(f"series {col!r}: tcode {self.tcodes[col]} not in 1..7")
            self.groups.setdefault(col, 0)
            if self.groups[col] not in VALID_GROUPS:
                raise ValidationError(f"series {col!r}: group {self.groups[col]} not in 1..8")

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.data.index

    @property
    def series_ids(self) -> list[str]:
        return list(self.data.columns)

    @property
    def values(self) -> np.ndarray:
        return self.data.to_numpy(dtype=float)

    def _replace(self, data: pd.DataFrame) -> "MacroPanel":
        cols = list(data.columns)
        return MacroPanel(
            data,
            {c: self.tcodes[c] for c in cols},
            {c: self.groups.get(c, 0) for c in cols},
        )


@dataclass
class PcaModel:
    """Principal components of a standardized panel.

    ``components`` holds every eigenvector as a row, sorted by decreasing
    eigenvalue; only the first ``n_kept`` are used to build factors.
    """

    mean_vector: np.ndarray
    scale_vector: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    n_kept: int
    series_ids: list[str] = field(default_factory=list)

    @property
    def cumulative_ratio(self) -> np.ndarray:
        return np.cumsum(self.explained_variance_ratio)

    def project(self, values: np.ndarray, n_components: int | None = None) -> np.ndarray:
        n = self.n_kept if n_components is None else n_components
        centered = np.asarray(values, dtype=float) - self.mean_vector
        return centered @ self.components[:n].T

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        """Back-project scores to centered data space."""
        scores = np.atleast_2d(scores)
        return scores @ self.components[: scores.shape[1]]


@dataclass
class FactorPanel:
    """PCA-reduced monthly state vectors, one row per month."""

    dates: pd.DatetimeIndex
    factors: np.ndarray

    def __post_init__(self):
        self.factors = np.asarray(self.factors, dtype=float)
        if self.factors.ndim != 2 or len(self.dates) != self.factors.shape[0]:
            raise DataError("factor matrix must be 2-D with one row per date")
        if not np.all(np.isfinite(self.factors)):
            raise DataError("factor panel contains missing or non-finite entries")

    def __len__(self):
        return self.factors.shape[0]

    def to_frame(self) -> pd.DataFrame:
        cols = [f"F{i + 1}" for i in range(self.factors.shape[1])]
        frame = pd.DataFrame(self.factors, index=self.dates, columns=cols)
        frame.index.name = "date"
        return frame

    def to_csv(self, path_or_buf=None, **kwargs):
        return self.to_frame().to_csv(path_or_buf, date_format="%Y-%m-%d", **kwargs)

    @classmethod
    def from_csv(cls, path_or_buf) -> "FactorPanel":
        frame = pd.read_csv(path_or_buf, index_col=0, parse_dates=[0], float_precision="round_trip")
        return cls(pd.DatetimeIndex(frame.index), frame.to_numpy(dtype=float))

    def slice(self, start: int, stop: int) -> "FactorPanel":
        return FactorPanel(self.dates[start:stop], self.factors[start:stop])


@dataclass
class IngestReport:
    n_series_raw: int
    n_series_after_exclusion: int
    n_series_used: int
    dropped_sparse: list[str]
    n_months: int
    n_kept: int
    cumulative_ratio: np.ndarray


# --------------------------------------------------------------------------- parsing


def _parse_date(cell: str, lineno: int) -> pd.Timestamp:
    try:
        d = datetime.strptime(cell.strip(), "%m/%d/%Y")
    except ValueError:
        raise ParseError(f"row {lineno}: malformed date {cell!r} (expected m/d/yyyy)") from None
    return pd.Timestamp(d.year, d.month, 1)


def _parse_value(cell: str, lineno: int, column: str) -> float:
    token = cell.strip()
    if token.lower() in _MISSING_TOKENS:
        return np.nan
    try:
        return float(token)
    except ValueError:
        raise ParseError(f"row {lineno}, column {column!r}: not a number: {cell!r}") from None


def _parse_tcode(cell: str, column: str) -> int:
    try:
        value = float(cell.strip())
    except ValueError:
        raise ValidationError(f"column {column!r}: tcode {cell!r} is not an integer") from None
    if not value.is_integer() or int(value) not in TCODES:
        raise ValidationError(f"column {column!r}: tcode {cell.strip()} outside 1..7")
    return int(value)


def parse_fred_md(csv_text: str, groups: Mapping[str, int] | None = None) -> MacroPanel:
    """Parse a FRED-MD formatted CSV.

    Row 1 holds the column names (first column is the date), row 2 the
    transform codes behind a ``Transform:`` marker, and every later row one
    month of observations dated ``m/d/yyyy``.  Empty cells become NaN.

    Parameters
    ----------
    csv_text : str
        File contents.
    groups : mapping, optional
        Series id -> group id, usually from :func:`read_group_map`.  Series
        missing from the map are kept with group 0 and reported in the log.
    """
    rows = list(csv.reader(io.StringIO(csv_text)))
    # 1-based physical line numbers survive blank-line skipping
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if len(numbered) < 2:
        raise ParseError("file needs a header row and a transform-code row")

    _, header = numbered[0]
    columns = [c.strip() for c in header[1:]]
    while columns and not columns[-1]:
        columns.pop()
    if not columns:
        raise ParseError("row 1: no series columns")
    if len(set(columns)) != len(columns):
        raise ParseError("row 1: duplicate series names")

    tline, trow = numbered[1]
    if not trow[0].strip().lower().startswith("transform"):
        raise ParseError(f"row {tline}: expected 'Transform:' marker, got {trow[0]!r}")
    tcells = trow[1:] + [""] * max(0, len(columns) - len(trow) + 1)
    tcodes = {col: _parse_tcode(tcells[j], col) for j, col in enumerate(columns)}

    dates, values = [], []
    for lineno, row in numbered[2:]:
        extra = [c for c in row[len(columns) + 1 :] if c.strip()]
        if extra:
            raise ParseError(f"row {lineno}: {len(row) - 1} values for {len(columns)} columns")
        dates.append(_parse_date(row[0], lineno))
        cells = row[1:] + [""] * max(0, len(columns) - len(row) + 1)
        values.append([_parse_value(cells[j], lineno, col) for j, col in enumerate(columns)])

    data = pd.DataFrame(values, index=pd.DatetimeIndex(dates), columns=columns, dtype=float)
    group_ids = {}
    if groups is not None:
        unmapped = [c for c in columns if c not in groups]
        if unmapped:
            logger.warning("%d series absent from the group map: %s", len(unmapped), unmapped)
        group_ids = {c: int(groups.get(c, 0)) for c in columns}
    return MacroPanel(data, tcodes, group_ids)


def read_group_map(csv_text: str) -> dict[str, int]:
    """Read a ``series_id,group_id`` sidecar CSV (header row optional)."""
    mapping = {}
    for lineno, row in enumerate(csv.reader(io.StringIO(csv_text)), start=1):
        if not row or not row[0].strip():
            continue
        if len(row) < 2:
            raise ParseError(f"group map row {lineno}: expected series_id,group_id")
        sid, gid = row[0].strip(), row[1].strip()
        if lineno == 1 and not gid.lstrip("-").isdigit():
            continue
        try:
            gid_int = int(gid)
        except ValueError:
            raise ParseError(f"group map row {lineno}: group {gid!r} is not an integer") from None
        if gid_int not in VALID_GROUPS or gid_int == 0:
            raise ValidationError(f"group map row {lineno}: group {gid_int} outside 1..8")
        mapping[sid] = gid_int
    return mapping


# --------------------------------------------------------------------------- transforms


def apply_tcode(series, tcode: int) -> np.ndarray:
    """Apply a FRED-MD stationarity transform.

    ====  =========================
    code  transform
    ====  =========================
    1     x
    2     Δx
    3     Δ²x
    4     ln x
    5     Δ ln x
    6     Δ² ln x
    7     Δ(x_t / x_{t-1} - 1)
    ====  =========================

    The output has the input's length; positions consumed by differencing are NaN.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise DataError("apply_tcode expects a 1-D series")
    if tcode not in TCODES:
        raise ValidationError(f"tcode {tcode} outside 1..7")
    need = LAGS_CONSUMED[tcode] + 1
    if len(x) < need:
        raise LengthError(f"tcode {tcode} needs at least {need} observations, got {len(x)}")

    if tcode in (4, 5, 6):
        present = x[~np.isnan(x)]
        if np.any(present <= 0):
            raise DomainError(f"tcode {tcode} takes logs but the series has nonpositive values")
        x = np.log(x)

    out = np.full_like(x, np.nan)
    if tcode in (1, 4):
        out[:] = x
    elif tcode in (2, 5):
        out[1:] = np.diff(x)
    elif tcode in (3, 6):
        out[2:] = np.diff(x, n=2)
    else:
        prev = x[:-1]
        if np.any(prev[~np.isnan(prev)] == 0):
            raise DomainError("tcode 7 divides by a zero observation")
        growth = np.full_like(x, np.nan)
        growth[1:] = x[1:] / prev - 1.0
        out[2:] = np.diff(growth[1:])
    return out


def transform_panel(panel: MacroPanel) -> MacroPanel:
    """Apply every column's t-code and drop the first two months."""
    if len(panel.dates) <= TRANSFORM_DROP:
        raise LengthError("panel too short to transform")
    out = {}
    for col in panel.series_ids:
        try:
            out[col] = apply_tcode(panel.data[col].to_numpy(), panel.tcodes[col])
        except DataError as exc:
            raise type(exc)(f"series {col!r}: {exc}") from None
    frame = pd.DataFrame(out, index=panel.dates).iloc[TRANSFORM_DROP:]
    return panel._replace(frame)


def drop_sparse_columns(panel: MacroPanel, max_missing_frac: float = 0.2) -> tuple[MacroPanel, list[str]]:
    """Remove series missing in more than ``max_missing_frac`` of the rows."""
    frac = panel.data.isna().mean(axis=0)
    dropped = [c for c in panel.series_ids if frac[c] > max_missing_frac]
    if dropped:
        logger.info("dropping %d sparse series: %s", len(dropped), dropped)
    return panel._replace(panel.data.drop(columns=dropped)), dropped


def standardize(panel: MacroPanel, return_stats: bool = False):
    """Z-score each column with the population standard deviation.

    Missing entries are set to 0 afterwards, i.e. imputed to the column mean.

    Returns
    -------
    MacroPanel, or (MacroPanel, means, stds) when ``return_stats`` is true.
    """
    values = panel.values
    counts = np.sum(~np.isnan(values), axis=0)
    for j, col in enumerate(panel.series_ids):
        if counts[j] < 2:
            raise DataError(f"series {col!r} has fewer than 2 observations")
    means = np.nanmean(values, axis=0)
    stds = np.nanstd(values, axis=0)
    for j, col in enumerate(panel.series_ids):
        spread = np.nanmax(values[:, j]) - np.nanmin(values[:, j])
        if spread == 0 or stds[j] == 0:
            raise DegenerateColumnError(f"series {col!r} has zero variance")
    z = (values - means) / stds
    z[np.isnan(z)] = 0.0
    out = panel._replace(pd.DataFrame(z, index=panel.dates, columns=panel.series_ids))
    if return_stats:
        return out, means, stds
    return out


def exclude_group(panel: MacroPanel, group_id: int) -> MacroPanel:
    """Drop every series belonging to ``group_id``; absent groups are a no-op."""
    if group_id not in VALID_GROUPS or group_id == 0:
        raise ConfigError(f"group id {group_id} outside 1..8")
    keep = [c for c in panel.series_ids if panel.groups.get(c, 0) != group_id]
    return panel._replace(panel.data[keep])


# --------------------------------------------------------------------------- PCA


def fit_pca(panel, variance_threshold: float = 0.95, scale_vector=None) -> tuple[PcaModel, FactorPanel]:
    """Eigendecompose the column covariance and keep enough components.

    ``n_kept`` is the smallest count whose cumulative explained variance
    reaches ``variance_threshold``.  Each component is sign-fixed so its
    largest-magnitude loading is positive.

    Parameters
    ----------
    panel : MacroPanel or DataFrame
        Standardized data without missing entries.
    variance_threshold : float
        In (0, 1].
    scale_vector : array, optional
        Standard deviations used during standardization, stored on the model.
    """
    if not 0 < variance_threshold <= 1:
        raise ConfigError(f"variance threshold must lie in (0, 1], got {variance_threshold}")
    frame = panel.data if isinstance(panel, MacroPanel) else pd.DataFrame(panel)
    X = frame.to_numpy(dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError("PCA needs a non-empty 2-D panel")
    if np.isnan(X).any():
        raise DataError("PCA input has missing entries; standardize first")

    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / X.shape[0]
    eigval, eigvec = np.linalg.eigh(cov)
    order = np.argsort(eigval, kind="stable")[::-1]
    eigval = np.clip(eigval[order], 0.0, None)
    comps = eigvec[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    total = eigval.sum()
    if total <= 0:
        raise DataError("PCA input has zero total variance")
    ratio = eigval / total
    cum = np.cumsum(ratio)
    n_kept = int(np.searchsorted(cum, variance_threshold - 1e-12) + 1)
    n_kept = min(n_kept, len(ratio))

    scale = np.ones(X.shape[1]) if scale_vector is None else np.asarray(scale_vector, dtype=float)
    model = PcaModel(mean, scale, comps, ratio, n_kept, list(frame.columns))
    dates = frame.index if isinstance(frame.index, pd.DatetimeIndex) else pd.DatetimeIndex([])
    factors = Xc @ comps[:n_kept].T
    if len(dates) != factors.shape[0]:
        dates = pd.date_range("2000-01-01", periods=factors.shape[0], freq="MS")
    return model, FactorPanel(dates, factors)


def build_factor_panel(
    panel: MacroPanel,
    variance_threshold: float = 0.95,
    excluded_groups: Iterable[int] = (6,),
    max_missing_frac: float = 0.2,
) -> tuple[PcaModel, FactorPanel, IngestReport]:
    """Full ingestion pipeline: exclude groups, transform, clean, standardize, PCA."""
    n_raw = len(panel.series_ids)
    for g in excluded_groups:
        panel = exclude_group(panel, g)
    n_after = len(panel.series_ids)
    logger.info("series count: %d raw, %d after excluding groups %s", n_raw, n_after, list(excluded_groups))

    transformed = transform_panel(panel)
    cleaned, dropped = drop_sparse_columns(transformed, max_missing_frac)
    std_panel, _, stds = standardize(cleaned, return_stats=True)
    model, factors = fit_pca(std_panel, variance_threshold, scale_vector=stds)
    logger.info(
        "PCA kept %d of %d components (cumulative %.4f)",
        model.n_kept, len(model.explained_variance_ratio), model.cumulative_ratio[model.n_kept - 1],
    )
    report = IngestReport(
        n_series_raw=n_raw,
        n_series_after_exclusion=n_after,
        n_series_used=len(cleaned.series_ids),
        dropped_sparse=dropped,
        n_months=len(factors),
        n_kept=model.n_kept,
        cumulative_ratio=model.cumulative_ratio,
    )
    return model, factors, report
