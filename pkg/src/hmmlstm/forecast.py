"""Direct multi-horizon forecasts with seed-ensemble bands, and mode comparisons."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DataError
from .ingest import SeriesTable
from .network import ExperimentResult, NetworkConfig, fit_and_score, mode_table, run_experiment, train
from .pipeline import forward_chain_folds, make_supervised, scaler_fit
from .regime import DecodedPath, GaussianHmm

METRIC_ROWS = ("MSE", "MAE", "R2")


@dataclass
class ForecastResult:
    horizon_dates: pd.DatetimeIndex
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    member_paths: np.ndarray
    config: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": self.horizon_dates.strftime("%Y-%m-%d"),
                "point": self.point,
                "lower": self.lower,
                "upper": self.upper,
            }
        )

    def members_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.member_paths.T, columns=[f"seed_{s}" for s in self.config.get("seeds", [])] or None)
        frame.insert(0, "date", self.horizon_dates.strftime("%Y-%m-%d"))
        return frame


def horizon_dates(index: pd.DatetimeIndex, horizon: int) -> pd.DatetimeIndex:
    return pd.date_range(index[-1] + pd.offsets.MonthBegin(1), periods=horizon, freq="MS", name="date")


def forecast_horizon(
    table: SeriesTable,
    mode: str = "all",
    horizon: int = 12,
    n_lags: int = 48,
    ensemble_size: int = 20,
    base_seed: int = 0,
    hmm: GaussianHmm | None = None,
    path: DecodedPath | None = None,
    seeds=None,
    epochs: int = 100,
    batch_size: int = 32,
    lr: float = 1e-3,
    hidden1: int = 50,
    hidden2: int = 50,
    dense: int = 25,
    clip_norm: float | None = 5.0,
    band: tuple[float, float] = (5.0, 95.0),
) -> ForecastResult:
    """Train an ensemble on every available sample and forecast the months
    after the table's last date from its final ``n_lags`` window.

    Members differ only in seed (``base_seed + s`` unless ``seeds`` is given).
    The point forecast is the per-step median; the band is the per-step
    empirical ``band`` percentiles.
    """
    seeds = list(seeds) if seeds is not None else [base_seed + s for s in range(ensemble_size)]
    if len(seeds) < 2:
        raise DataError("ensemble needs at least 2 members")
    data = mode_table(table, mode, hmm, path)
    if len(data) <= n_lags + horizon:
        raise DataError(f"insufficient history: {len(data)} rows for {n_lags} lags and horizon {horizon}")
    scaler = scaler_fit(data.values, data.columns)
    scaled = SeriesTable(pd.DataFrame(scaler.transform(data.values), index=data.index, columns=data.columns),
                         data.target_name)
    tensor = make_supervised(scaled, n_lags, horizon)
    window = scaled.values[-n_lags:][None]
    config = NetworkConfig(len(data.columns), n_lags, horizon, hidden1, hidden2, dense)
    target_scaler = scaler.column(data.target_name)

    members = []
    for seed in seeds:
        net, _ = train(config, tensor, epochs, batch_size, lr, seed, clip_norm, scaler=scaler)
        members.append(target_scaler.inverse_transform(net.predict(window).reshape(-1, 1)).ravel())
    members = np.vstack(members)
    point = np.median(members, axis=0)
    lower, upper = np.percentile(members, band, axis=0)
    snapshot = {
        "mode": mode, "horizon": horizon, "n_lags": n_lags, "seeds": seeds, "epochs": epochs,
        "batch_size": batch_size, "lr": lr, "band": list(band),
    }
    return ForecastResult(horizon_dates(data.index, horizon), point, np.minimum(lower, point),
                          np.maximum(upper, point), members, snapshot)


@dataclass
class Comparison:
    """``frame`` is metrics x modes for a single split, or (mode, metric) x
    folds for cross-validation. ``results[mode]`` lists one result per fold."""

    frame: pd.DataFrame
    results: dict


def compare_configs(
    table: SeriesTable,
    modes=("original", "states", "means", "all"),
    hmm: GaussianHmm | None = None,
    path: DecodedPath | None = None,
    n_folds: int | None = None,
    train_fraction: float = 0.7,
    split_date=None,
    **train_kwargs,
) -> Comparison:
    """Score each dataset mode on one chronological split (``n_folds=None``)
    or on forward-chaining folds."""
    results = {}
    if n_folds is None:
        for mode in modes:
            results[mode] = [run_experiment(table, mode, hmm, path, train_fraction, split_date, **train_kwargs)]
        frame = pd.DataFrame(
            {mode: [getattr(results[mode][0].metrics, m.lower()) for m in METRIC_ROWS] for mode in modes},
            index=list(METRIC_ROWS),
        )
        frame.index.name = "metric"
        return Comparison(frame, results)

    n_lags = train_kwargs.get("n_lags", 24)
    horizon = train_kwargs.get("horizon", 1)
    n_samples = len(make_supervised(table, n_lags, horizon))
    plan = forward_chain_folds(n_samples, n_folds)
    rows, index = [], []
    for mode in modes:
        data = mode_table(table, mode, hmm, path)
        fold_results: list[ExperimentResult] = [
            fit_and_score(data, tr, te, mode=mode, **train_kwargs) for tr, te in plan
        ]
        results[mode] = fold_results
        for metric in METRIC_ROWS:
            index.append((mode, metric))
            rows.append([getattr(r.metrics, metric.lower()) for r in fold_results])
    frame = pd.DataFrame(
        rows,
        index=pd.MultiIndex.from_tuples(index, names=["mode", "metric"]),
        columns=[f"Fold {i + 1}" for i in range(n_folds)],
    )
    return Comparison(frame, results)


def path_volatility(result: ForecastResult) -> float:
    """Variance of the point forecast across the horizon."""
    return float(np.var(result.point))
