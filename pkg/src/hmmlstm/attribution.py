"""Integrated Gradients over lagged network inputs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import DataError


def input_gradient(model, x, output_index: int = 0) -> np.ndarray:
    """Exact reverse-mode gradient of one scalar output w.r.t. the input.

    ``model`` is anything with an ``input_gradient(X, output_index)`` method
    taking a batch (an :class:`~hmmlstm.network.LstmNetwork` does). A single
    ``[L x D]`` window returns a single ``[L x D]`` gradient.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 2
    grads = model.input_gradient(x[None] if single else x, output_index)
    return grads[0] if single else grads


def integrated_gradients(model, x, baseline=None, m: int = 50, output_index: int = 0,
                         chunk: int = 512) -> np.ndarray:
    """Right-endpoint Riemann approximation of Integrated Gradients.

    ``IG_i = (x_i - x'_i) * (1/m) * sum_{k=1..m} dF(x' + k/m (x - x'))/dx_i``
    for one ``[L x D]`` window. ``baseline`` defaults to zeros.
    """
    x = np.asarray(x, dtype=float)
    baseline = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=float)
    if x.shape != baseline.shape:
        raise DataError(f"input {x.shape} and baseline {baseline.shape} differ in shape")
    if m < 1:
        raise DataError("m must be at least 1")
    delta = x - baseline
    total = np.zeros_like(x)
    alphas = np.arange(1, m + 1) / m
    for start in range(0, m, chunk):
        a = alphas[start : start + chunk]
        path = baseline[None] + a[:, None, None] * delta[None]
        total += model.input_gradient(path, output_index).sum(axis=0)
    return delta * total / m


@dataclass
class AttributionMap:
    values: np.ndarray
    baseline_kind: str
    m_steps: int
    feature_names: list[str]
    sample_dates: pd.DatetimeIndex | None = None
    output_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[2] != len(self.feature_names):
            raise DataError("attribution values must be [samples x lags x features]")
        if not np.isfinite(self.values).all():
            raise DataError("non-finite attribution values")

    def mean_by_feature(self, magnitude: bool = False) -> pd.Series:
        return pd.Series(average_attributions(self.values, magnitude), index=self.feature_names, name="mean_value")

    def long_frame(self) -> pd.DataFrame:
        """``sample_date, lag, feature, value`` rows; lag 1 is the most recent step."""
        n, L, D = self.values.shape
        dates = (
            pd.DatetimeIndex(self.sample_dates).strftime("%Y-%m-%d")
            if self.sample_dates is not None
            else pd.Index([str(i) for i in range(n)])
        )
        lag = np.tile(np.repeat(np.arange(L, 0, -1), D), n)
        return pd.DataFrame(
            {
                "sample_date": np.repeat(np.asarray(dates), L * D),
                "lag": lag,
                "feature": np.tile(self.feature_names, n * L),
                "value": self.values.ravel(),
            }
        )


def average_attributions(maps, magnitude: bool = False) -> np.ndarray:
    """Mean over samples and lags (signed by default) -> one value per feature."""
    values = np.asarray(maps.values if isinstance(maps, AttributionMap) else maps, dtype=float)
    if values.ndim == 2:
        values = values[None]
    if values.size == 0 or values.shape[0] == 0:
        raise DataError("no attribution samples to average")
    if magnitude:
        values = np.abs(values)
    return values.mean(axis=(0, 1))


def attribute_samples(model, X, baseline="zeros", m: int = 50, output_index: int = 0,
                      feature_names=None, sample_dates=None, train_X=None) -> AttributionMap:
    """Integrated Gradients for every window in ``X``.

    ``baseline`` is ``"zeros"`` (scaled space) or ``"train_mean"``, the latter
    averaging ``train_X`` over samples and lags per feature.
    """
    X = np.asarray(X, dtype=float)
    if baseline == "zeros":
        base = np.zeros(X.shape[1:])
    elif baseline == "train_mean":
        if train_X is None:
            raise DataError("train_mean baseline needs train_X")
        base = np.broadcast_to(np.asarray(train_X).mean(axis=(0, 1)), X.shape[1:]).copy()
    else:
        raise DataError(f"unknown baseline {baseline!r}")
    values = np.stack([integrated_gradients(model, x, base, m, output_index) for x in X])
    names = list(feature_names) if feature_names is not None else [f"f{j}" for j in range(X.shape[2])]
    return AttributionMap(values, baseline, m, names, sample_dates, output_index)
