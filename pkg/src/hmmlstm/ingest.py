"""Raw series acquisition, monthly alignment, growth rates and diagnostics."""
from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from .errors import DataError, DegenerateError

FREQUENCIES = ("daily", "monthly", "quarterly")
MISSING_MARKERS = ("", ".")

# Large-sample Dickey-Fuller critical values, constant-only regression.
ADF_CRITICAL_VALUES = {"1%": -3.43, "5%": -2.86, "10%": -2.57}
# MacKinnon (2010) response surface coefficients (b0, b1, b2) for the same case.
_ADF_SURFACE = {
    "1%": (-3.43035, -6.5393, -16.786),
    "5%": (-2.86154, -2.8903, -4.234),
    "10%": (-2.56677, -1.5384, -2.809),
}


def _month_start(dates: np.ndarray) -> np.ndarray:
    return dates.astype("datetime64[M]").astype("datetime64[D]")


def _infer_frequency(dates: np.ndarray) -> str:
    if len(dates) < 2:
        raise DataError("fewer than 2 rows")
    spacing = float(np.median(np.diff(dates).astype(np.int64)))
    if spacing <= 7:
        return "daily"
    if 27 <= spacing <= 32:
        return "monthly"
    if 88 <= spacing <= 93:
        return "quarterly"
    raise DataError(f"cannot infer frequency from median spacing of {spacing:g} days")


@dataclass(frozen=True)
class RawSeries:
    """A single observed series before alignment.

    ``values`` uses NaN for absent observations.
    """

    id: str
    frequency: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        if self.frequency not in FREQUENCIES:
            raise DataError(f"{self.id}: unknown frequency {self.frequency!r}")
        if dates.shape != values.shape or dates.ndim != 1:
            raise DataError(f"{self.id}: dates and values must be equal-length vectors")
        if len(dates) > 1:
            if np.any(np.diff(dates) <= np.timedelta64(0, "D")):
                raise DataError(f"{self.id}: dates must be strictly increasing")
            observed = _infer_frequency(dates)
            if observed != self.frequency:
                raise DataError(
                    f"{self.id}: tagged {self.frequency} but observed spacing looks {observed}"
                )

    def __len__(self) -> int:
        return len(self.dates)

    def to_pandas(self) -> pd.Series:
        return pd.Series(self.values, index=pd.DatetimeIndex(self.dates), name=self.id)


def _parse_date(text: str) -> np.datetime64 | None:
    try:
        return np.datetime64(pd.Timestamp(text.strip()).date(), "D")
    except (ValueError, TypeError):
        return None


def _read_source(source: str | os.PathLike, cache_dir: str | os.PathLike | None) -> str:
    src = str(source)
    if src.startswith(("http://", "https://", "file://")):
        cached = None
        if cache_dir is not None:
            digest = hashlib.sha256(src.encode()).hexdigest()[:16]
            cached = Path(cache_dir) / f"{digest}.csv"
            if cached.exists():
                return cached.read_text()
        try:
            with urllib.request.urlopen(src, timeout=30) as resp:
                text = resp.read().decode("utf-8")
        except OSError as exc:
            raise DataError(f"unreachable source {src}: {exc}") from exc
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            cached.write_text(text)
        return text
    try:
        return Path(src).read_text()
    except OSError as exc:
        raise DataError(f"unreachable source {src}: {exc}") from exc


def fetch_csv(
    source: str | os.PathLike,
    id: str,
    frequency: str | None = None,
    cache_dir: str | os.PathLike | None = None,
) -> RawSeries:
    """Read a two-column ``date,value`` CSV (FRED ``fredgraph.csv`` layout).

    A header row is detected when its first field is not a date. Values equal
    to ``"."`` or empty become NaN. ``frequency`` is inferred from the date
    spacing when omitted. Remote sources are cached under ``cache_dir`` when
    one is given.
    """
    text = _read_source(source, cache_dir)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows and _parse_date(rows[0][0]) is None:
        rows = rows[1:]
    if len(rows) < 2:
        raise DataError(f"{id}: fewer than 2 rows")

    dates, values = [], []
    for lineno, row in enumerate(rows, 1):
        if len(row) < 2:
            raise DataError(f"{id}: row {lineno} has fewer than two fields")
        d = _parse_date(row[0])
        if d is None:
            raise DataError(f"{id}: unparseable date {row[0]!r}")
        raw = row[1].strip()
        if raw in MISSING_MARKERS:
            values.append(math.nan)
        else:
            try:
                values.append(float(raw))
            except ValueError as exc:
                raise DataError(f"{id}: unparseable value {raw!r} on {row[0]}") from exc
        dates.append(d)
    dates = np.array(dates, dtype="datetime64[D]")
    if frequency is None:
        frequency = _infer_frequency(dates)
    return RawSeries(id=id, frequency=frequency, dates=dates, values=np.array(values))


def to_monthly(raw: RawSeries, method: str, end=None) -> RawSeries:
    """Convert a quarterly (``interpolate_linear``) or daily (``aggregate_mean``)
    series to month-start frequency.

    Quarterly values are anchored at their quarter-start month and interior
    months are filled linearly in month steps. When ``end`` is later than the
    last anchor, the trailing months are held at the last value.
    Daily values are averaged per calendar month, absent days excluded.
    """
    if method == "interpolate_linear":
        if raw.frequency != "quarterly":
            raise DataError(f"{raw.id}: interpolate_linear needs quarterly input, got {raw.frequency}")
        if np.isnan(raw.values).any():
            raise DataError(f"{raw.id}: absent quarterly values cannot be interpolated")
        anchors = raw.dates.astype("datetime64[M]")
        months = np.arange(anchors[0], anchors[-1] + 1)
        last = months[-1]
        if end is not None:
            last = max(last, np.datetime64(pd.Timestamp(end).date(), "M"))
            months = np.arange(anchors[0], last + 1)
        pos = (months - anchors[0]).astype(np.int64).astype(float)
        xp = (anchors - anchors[0]).astype(np.int64).astype(float)
        values = np.interp(pos, xp, raw.values)
        return RawSeries(raw.id, "monthly", months.astype("datetime64[D]"), values)

    if method == "aggregate_mean":
        if raw.frequency != "daily":
            raise DataError(f"{raw.id}: aggregate_mean needs daily input, got {raw.frequency}")
        months = raw.dates.astype("datetime64[M]")
        keys, inverse = np.unique(months, return_inverse=True)
        present = ~np.isnan(raw.values)
        sums = np.bincount(inverse, weights=np.where(present, raw.values, 0.0), minlength=len(keys))
        counts = np.bincount(inverse, weights=present.astype(float), minlength=len(keys))
        with np.errstate(invalid="ignore", divide="ignore"):
            means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        return RawSeries(raw.id, "monthly", keys.astype("datetime64[D]"), means)

    raise DataError(f"unknown monthly conversion method {method!r}")


def _require_contiguous_monthly(series: RawSeries) -> None:
    if series.frequency != "monthly":
        raise DataError(f"{series.id}: expected monthly series, got {series.frequency}")
    months = series.dates.astype("datetime64[M]").astype(np.int64)
    if len(months) > 1 and np.any(np.diff(months) != 1):
        raise DataError(f"{series.id}: monthly dates are not contiguous")


def pct_change_year(series: RawSeries, scale: str = "percent") -> RawSeries:
    """Year-over-year growth ``x_t / x_{t-12} - 1``, times 100 for ``percent``.

    The first twelve months are dropped.
    """
    factor = {"percent": 100.0, "fraction": 1.0}.get(scale)
    if factor is None:
        raise DataError(f"unknown growth scale {scale!r}")
    _require_contiguous_monthly(series)
    if len(series) < 13:
        raise DataError(f"{series.id}: need at least 13 monthly observations")
    base = series.values[:-12]
    if np.any(base == 0):
        raise DataError(f"{series.id}: zero denominator in year-over-year change")
    growth = (series.values[12:] / base - 1.0) * factor
    return RawSeries(series.id, "monthly", series.dates[12:], growth)


@dataclass
class SeriesTable:
    """Aligned monthly table: month-start ``DatetimeIndex`` and float columns."""

    frame: pd.DataFrame
    target_name: str
    _checked: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        frame = self.frame
        if not isinstance(frame.index, pd.DatetimeIndex):
            raise DataError("table index must be a DatetimeIndex")
        if len(frame) == 0:
            raise DataError("table is empty")
        months = frame.index.to_period("M")
        if (frame.index != months.to_timestamp()).any():
            raise DataError("table index must hold month-start dates")
        ordinals = months.asi8
        if len(ordinals) > 1 and np.any(np.diff(ordinals) != 1):
            raise DataError("table index is not contiguous monthly")
        if frame.isna().to_numpy().any():
            raise DataError("table contains missing values")
        if self.target_name not in frame.columns:
            raise DataError(f"target {self.target_name!r} not among columns")
        self.frame = frame.astype(float)
        self.frame.index.name = "date"

    @property
    def index(self) -> pd.DatetimeIndex:
        return self.frame.index

    @property
    def columns(self) -> list[str]:
        return list(self.frame.columns)

    @property
    def values(self) -> np.ndarray:
        return self.frame.to_numpy()

    def __len__(self) -> int:
        return len(self.frame)

    def __eq__(self, other):
        if not isinstance(other, SeriesTable):
            return NotImplemented
        return self.target_name == other.target_name and self.frame.equals(other.frame)

    def select(self, columns) -> "SeriesTable":
        return SeriesTable(self.frame[list(columns)].copy(), self.target_name)

    def drop(self, columns) -> "SeriesTable":
        return SeriesTable(self.frame.drop(columns=list(columns)), self.target_name)

    def to_series(self) -> dict[str, RawSeries]:
        dates = self.index.values.astype("datetime64[D]")
        return {
            name: RawSeries(name, "monthly", dates, self.frame[name].to_numpy())
            for name in self.columns
        }

    def to_csv(self, path: str | os.PathLike) -> None:
        out = self.frame.copy()
        out.index = out.index.strftime("%Y-%m-%d")
        out.to_csv(path, index_label="date", float_format="%.17g")

    @classmethod
    def from_csv(cls, path: str | os.PathLike, target_name: str) -> "SeriesTable":
        try:
            frame = pd.read_csv(path, float_precision="round_trip")
        except (OSError, pd.errors.ParserError) as exc:
            raise DataError(f"cannot read dataset {path}: {exc}") from exc
        if frame.columns[0] != "date":
            raise DataError("dataset CSV must start with a 'date' column")
        frame.index = pd.DatetimeIndex(pd.to_datetime(frame.pop("date")), name="date")
        return cls(frame, target_name)


def align(series, start=None, end=None, target: str | None = None) -> SeriesTable:
    """Restrict monthly series to a shared contiguous month range.

    ``start``/``end`` default to the intersection of the series' observed
    coverage. Every series must have a present value in every month of the
    range. ``series`` may also be an existing :class:`SeriesTable`.
    """
    if isinstance(series, SeriesTable):
        target = target or series.target_name
        series = series.to_series()
    if not series:
        raise DataError("no series to align")
    if target is None:
        raise DataError("target column name is required")

    for s in series.values():
        if s.frequency != "monthly":
            raise DataError(f"{s.id}: align needs monthly series, got {s.frequency}")

    def present_months(s: RawSeries) -> np.ndarray:
        return s.dates[~np.isnan(s.values)].astype("datetime64[M]")

    lo = max(present_months(s).min() for s in series.values())
    hi = min(present_months(s).max() for s in series.values())
    if start is not None:
        lo = np.datetime64(pd.Timestamp(start).date(), "M")
    if end is not None:
        hi = np.datetime64(pd.Timestamp(end).date(), "M")
    if hi < lo:
        raise DataError("empty intersection of series date ranges")

    months = np.arange(lo, hi + 1)
    columns = {}
    for name, s in series.items():
        lookup = pd.Series(s.values, index=s.dates.astype("datetime64[M]"))
        lookup = lookup[~lookup.index.duplicated()]
        vals = lookup.reindex(months).to_numpy()
        missing = np.isnan(vals)
        if missing.any():
            first = months[np.argmax(missing)]
            raise DataError(
                f"coverage gap: series {name!r} has {int(missing.sum())} missing months "
                f"in range (first {first})"
            )
        columns[name] = vals
    index = pd.DatetimeIndex(months.astype("datetime64[ns]"), name="date")
    return SeriesTable(pd.DataFrame(columns, index=index), target)


def summary_stats(table: SeriesTable) -> pd.DataFrame:
    """Descriptive statistics in a count/mean/std/min/25%/50%/75%/max layout.

    Standard deviation uses the n-1 denominator; quartiles interpolate linearly
    between order statistics.
    """
    x = table.values
    q = np.percentile(x, [25, 50, 75], axis=0)
    std = x.std(axis=0, ddof=1) if len(x) > 1 else np.full(x.shape[1], np.nan)
    rows = {
        "count": np.full(x.shape[1], float(len(x))),
        "mean": x.mean(axis=0),
        "std": std,
        "min": x.min(axis=0),
        "25%": q[0],
        "50%": q[1],
        "75%": q[2],
        "max": x.max(axis=0),
    }
    return pd.DataFrame(rows, index=table.columns).T


def correlation_matrix(table: SeriesTable) -> pd.DataFrame:
    x = table.values
    sd = x.std(axis=0)
    if np.any(sd == 0):
        bad = [c for c, s in zip(table.columns, sd) if s == 0]
        raise DegenerateError(f"zero-variance columns: {bad}")
    r = np.atleast_2d(np.corrcoef(x, rowvar=False))
    r = np.clip((r + r.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return pd.DataFrame(r, index=table.columns, columns=table.columns)


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    used_lag: int
    n_obs: int
    critical_values: dict
    stationary: bool


def _ols(y: np.ndarray, X: np.ndarray):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateError("singular ADF regression matrix")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def _adf_design(x: np.ndarray, lag: int, start: int):
    dx = np.diff(x)
    rows = np.arange(start, len(dx))
    cols = [np.ones(len(rows)), x[rows]]
    cols += [dx[rows - j] for j in range(1, lag + 1)]
    return dx[rows], np.column_stack(cols)


def adf_test(series, max_lag: int | None = None, finite_sample: bool = False) -> AdfResult:
    """Augmented Dickey-Fuller test with a constant and AIC lag selection.

    Lags 0..max_lag are compared by AIC on the common sample that the largest
    lag allows; the chosen order is then re-estimated on all usable rows. The
    statistic is the t-ratio on the lagged level. ``max_lag`` defaults to
    ``ceil(12 (n/100)^(1/4))``. With ``finite_sample`` the critical values come
    from the MacKinnon response surface at the effective sample size instead of
    the large-sample table.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or not np.isfinite(x).all():
        raise DataError("ADF input must be a finite vector")
    n = len(x)
    if max_lag is None:
        max_lag = int(math.ceil(12.0 * (n / 100.0) ** 0.25))
        max_lag = max(0, min(n // 2 - 2, max_lag))
    if max_lag < 0:
        raise DataError("max_lag must be non-negative")
    if n <= max_lag + 10:
        raise DataError(f"series too short for ADF with max_lag={max_lag} (n={n})")

    best_lag, best_aic = 0, math.inf
    for lag in range(max_lag + 1):
        y, X = _adf_design(x, lag, max_lag)
        _, ssr = _ols(y, X)
        m = len(y)
        llf = -0.5 * m * (math.log(2 * math.pi) + math.log(ssr / m) + 1.0)
        aic = -2.0 * llf + 2.0 * X.shape[1]
        if aic < best_aic:
            best_lag, best_aic = lag, aic

    y, X = _adf_design(x, best_lag, best_lag)
    beta, ssr = _ols(y, X)
    nobs, k = X.shape
    sigma2 = ssr / (nobs - k)
    cov = sigma2 * np.linalg.inv(X.T @ X)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))

    if finite_sample:
        crit = {lvl: b0 + b1 / nobs + b2 / nobs**2 for lvl, (b0, b1, b2) in _ADF_SURFACE.items()}
    else:
        crit = dict(ADF_CRITICAL_VALUES)
    return AdfResult(stat, best_lag, nobs, crit, stat < crit["5%"])


def adf_table(table: SeriesTable, max_lag: int | None = None, finite_sample: bool = False) -> pd.DataFrame:
    """One ADF row per column, ordered like a published ADF results table."""
    records = []
    for name in table.columns:
        res = adf_test(table.frame[name].to_numpy(), max_lag, finite_sample)
        records.append(
            {
                "variable": name,
                "adf_statistic": res.statistic,
                "used_lag": res.used_lag,
                "nobs": res.n_obs,
                "1%": res.critical_values["1%"],
                "5%": res.critical_values["5%"],
                "10%": res.critical_values["10%"],
                "stationary": "Yes" if res.stationary else "No",
            }
        )
    return pd.DataFrame.from_records(records)


def build_series(
    raw: RawSeries,
    transform: str = "none",
    scale: str = "percent",
    method: str | None = None,
    end=None,
) -> RawSeries:
    """Frequency-normalise ``raw`` then apply the configured growth transform."""
    if raw.frequency == "quarterly":
        raw = to_monthly(raw, method or "interpolate_linear", end=end)
    elif raw.frequency == "daily":
        raw = to_monthly(raw, method or "aggregate_mean")
    if transform == "pct_change_year":
        return pct_change_year(raw, scale)
    if transform != "none":
        raise DataError(f"{raw.id}: unknown transform {transform!r}")
    return raw


__all__ = [
    "RawSeries",
    "SeriesTable",
    "AdfResult",
    "fetch_csv",
    "to_monthly",
    "pct_change_year",
    "align",
    "summary_stats",
    "correlation_matrix",
    "adf_test",
    "adf_table",
    "build_series",
    "ADF_CRITICAL_VALUES",
]
