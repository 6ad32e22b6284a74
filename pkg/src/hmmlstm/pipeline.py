"""Scaling, lagged tensors, chronological splits and forward-chaining folds."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError
from .ingest import SeriesTable


@dataclass
class ScalerParams:
    """Column-wise min-max scaling to [0, 1], fitted on training rows."""

    min: np.ndarray
    max: np.ndarray
    feature_names: list[str] | None = None

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.max = np.asarray(self.max, dtype=float)
        if self.min.shape != self.max.shape or np.any(self.max < self.min):
            raise DataError("scaler requires max >= min per column")

    @property
    def degenerate(self) -> np.ndarray:
        return self.max == self.min

    def _check(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=float)
        if rows.shape[-1] != len(self.min):
            raise DataError(f"column mismatch: scaler has {len(self.min)} columns, got {rows.shape[-1]}")
        return rows

    def transform(self, rows) -> np.ndarray:
        rows = self._check(rows)
        span = np.where(self.degenerate, 1.0, self.max - self.min)
        out = (rows - self.min) / span
        return np.where(self.degenerate, 0.0, out)

    def inverse_transform(self, rows) -> np.ndarray:
        rows = self._check(rows)
        return rows * (self.max - self.min) + self.min

    def column(self, name_or_index) -> "ScalerParams":
        """Scaler restricted to a single column (used for the target)."""
        j = self.feature_names.index(name_or_index) if isinstance(name_or_index, str) else int(name_or_index)
        name = [self.feature_names[j]] if self.feature_names else None
        return ScalerParams(self.min[j : j + 1], self.max[j : j + 1], name)

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist(), "feature_names": self.feature_names}

    @classmethod
    def from_dict(cls, doc: dict) -> "ScalerParams":
        return cls(doc["min"], doc["max"], doc.get("feature_names"))


def scaler_fit(rows, feature_names=None) -> ScalerParams:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    if rows.shape[0] == 0:
        raise DataError("cannot fit a scaler on zero rows")
    names = list(feature_names) if feature_names is not None else None
    return ScalerParams(rows.min(axis=0), rows.max(axis=0), names)


def scaler_transform(params: ScalerParams, rows) -> np.ndarray:
    return params.transform(rows)


def inverse_transform(params: ScalerParams, rows) -> np.ndarray:
    return params.inverse_transform(rows)


@dataclass
class SupervisedTensor:
    """``X[i]`` holds ``n_lags`` consecutive rows; ``y[i]`` the next ``horizon``
    target values. ``sample_dates[i]`` is the date of the first target step."""

    X: np.ndarray
    y: np.ndarray
    sample_dates: pd.DatetimeIndex
    feature_names: list[str] | None = None
    target_index: int = 0

    def __len__(self) -> int:
        return len(self.X)

    @property
    def n_lags(self) -> int:
        return self.X.shape[1]

    @property
    def n_features(self) -> int:
        return self.X.shape[2]

    @property
    def horizon(self) -> int:
        return self.y.shape[1]

    def subset(self, start: int, stop: int) -> "SupervisedTensor":
        return SupervisedTensor(
            self.X[start:stop], self.y[start:stop], self.sample_dates[start:stop], self.feature_names, self.target_index
        )


def make_supervised(
    table,
    n_lags: int,
    horizon: int = 1,
    target=None,
    dates=None,
) -> SupervisedTensor:
    """Slice a table (or a rows x features array) into lag windows.

    The target's own lags are part of ``X``. ``target`` names or indexes the
    target column; for a :class:`SeriesTable` it defaults to its target.
    """
    if isinstance(table, SeriesTable):
        names = table.columns
        values = table.values
        dates = table.index
        target = table.target_name if target is None else target
    else:
        values = np.asarray(table, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        names = None
        target = 0 if target is None else target
    if isinstance(target, str):
        if names is None or target not in names:
            raise DataError(f"target {target!r} not among columns")
        t_idx = names.index(target)
    else:
        t_idx = int(target)
    if n_lags < 1 or horizon < 1:
        raise DataError("n_lags and horizon must be positive")
    n_rows = values.shape[0]
    n_samples = n_rows - n_lags - horizon + 1
    if n_samples < 1:
        raise DataError(f"insufficient rows: {n_rows} rows for {n_lags} lags and horizon {horizon}")
    if not np.isfinite(values).all():
        raise DataError("table contains non-finite values")

    windows = np.lib.stride_tricks.sliding_window_view(values, n_lags, axis=0)
    X = np.ascontiguousarray(windows[:n_samples].transpose(0, 2, 1))
    target_col = values[:, t_idx]
    y = np.lib.stride_tricks.sliding_window_view(target_col[n_lags:], horizon)[:n_samples].copy()
    if dates is None:
        dates = pd.RangeIndex(n_rows)
    sample_dates = dates[n_lags : n_lags + n_samples]
    return SupervisedTensor(X, y, sample_dates, names, t_idx)


def split_index(n_samples: int, train_fraction: float = 0.7) -> int:
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must be in (0, 1), got {train_fraction}")
    return int(math.floor(train_fraction * n_samples))


def chrono_split(tensor: SupervisedTensor, train_fraction: float = 0.7, split_date=None):
    """Ordered, non-overlapping train/test partition.

    With ``split_date`` the test set starts at the first sample whose date is
    on or after it; otherwise at ``floor(train_fraction * n)``.
    """
    if split_date is not None:
        cut = int(np.searchsorted(np.asarray(tensor.sample_dates), np.datetime64(pd.Timestamp(split_date))))
        if not 0 < cut < len(tensor):
            raise DataError(f"split date {split_date} leaves an empty partition")
    else:
        cut = split_index(len(tensor), train_fraction)
    return tensor.subset(0, cut), tensor.subset(cut, len(tensor))


def rows_used_by(sample_stop: int, n_lags: int, horizon: int) -> int:
    """Number of leading table rows touched by samples ``[0, sample_stop)``."""
    return sample_stop + n_lags + horizon - 1 if sample_stop > 0 else 0


@dataclass(frozen=True)
class FoldPlan:
    """``folds[i] = ((train_start, train_stop), (test_start, test_stop))``,
    half-open sample ranges."""

    folds: tuple

    def __iter__(self):
        return iter(self.folds)

    def __len__(self) -> int:
        return len(self.folds)


def forward_chain_folds(n_samples: int, n_folds: int = 5) -> FoldPlan:
    """Expanding-window folds over ``n_folds + 1`` contiguous blocks.

    Block sizes are equal with the remainder added to the first block. Fold
    ``i`` trains on blocks ``0..i`` and tests on block ``i + 1``.
    """
    if n_folds < 1:
        raise DataError("n_folds must be at least 1")
    n_blocks = n_folds + 1
    if n_samples < n_blocks * 2:
        raise DataError(f"too few samples ({n_samples}) for {n_folds} folds")
    size, rem = divmod(n_samples, n_blocks)
    bounds = [0, size + rem]
    for _ in range(n_folds):
        bounds.append(bounds[-1] + size)
    folds = tuple(((0, bounds[i + 1]), (bounds[i + 1], bounds[i + 2])) for i in range(n_folds))
    return FoldPlan(folds)


@dataclass
class PreparedSplit:
    """Scaled train/test tensors and the scaler fitted on training rows."""

    train: SupervisedTensor
    test: SupervisedTensor
    scaler: ScalerParams


def prepare_split(
    table: SeriesTable,
    n_lags: int,
    horizon: int,
    train_samples: tuple[int, int],
    test_samples: tuple[int, int] | None,
) -> PreparedSplit:
    """Fit the scaler on the rows the training samples touch, scale the whole
    table with it and slice train/test samples out of the scaled tensor."""
    t0, t1 = train_samples
    if t0 != 0 or t1 <= 0:
        raise DataError("training samples must start at 0 and be non-empty")
    fit_rows = rows_used_by(t1, n_lags, horizon)
    scaler = scaler_fit(table.values[:fit_rows], table.columns)
    scaled = SeriesTable(
        pd.DataFrame(scaler.transform(table.values), index=table.index, columns=table.columns),
        table.target_name,
    )
    tensor = make_supervised(scaled, n_lags, horizon)
    train = tensor.subset(t0, t1)
    test = tensor.subset(*test_samples) if test_samples is not None else tensor.subset(t1, t1)
    return PreparedSplit(train, test, scaler)
