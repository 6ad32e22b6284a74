"""Synthetic raw-source CSVs and a run config shaped like the real inputs.

Nine feature series at daily, monthly and quarterly frequency (levels that are
turned into growth rates, plus rates used as-is), a 0/1 recession label and an
oil series that is kept in the dataset but excluded from modelling. After
transforms the aligned table spans 1970-01 .. 2023-11, i.e. 647 months.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pandas as pd

START, END = "1970-01-01", "2023-11-01"
RAW_START = "1968-10-01"
FEATURES = (
    "inflation_rate",
    "unemployment_rate",
    "federal_funds_rate",
    "market_yield_10_rate",
    "ppi_rate",
    "gdp_pc1",
    "gdp_invest_pc1",
    "sp500_yoy",
    "consumer_senti_pc1",
)


def _regimes(n: int, rng) -> np.ndarray:
    trans = np.array([[0.97, 0.03], [0.12, 0.88]])
    s = np.zeros(n, dtype=int)
    for t in range(1, n):
        s[t] = rng.choice(2, p=trans[s[t - 1]])
    return s


def _write(path: Path, dates, values) -> None:
    lines = ["DATE,VALUE"]
    for d, v in zip(pd.DatetimeIndex(dates).strftime("%Y-%m-%d"), values):
        lines.append(f"{d},{'.' if np.isnan(v) else format(float(v), '.10g')}")
    path.write_text("\n".join(lines) + "\n")


def write_sources(directory: Path, seed: int = 0) -> dict:
    """Write the raw CSVs; returns ``{series: (file name, frequency)}``."""
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    months = pd.date_range(RAW_START, END, freq="MS")
    n = len(months)
    rec = _regimes(n, rng)
    shock = np.where(rec == 1, -1.0, 0.3)

    def level(drift, vol, sens):
        steps = drift + sens * shock / 100 + vol * rng.standard_normal(n)
        return 100 * np.exp(np.cumsum(steps))

    def rate(mean, vol, sens):
        x = np.empty(n)
        x[0] = mean
        for t in range(1, n):
            x[t] = x[t - 1] + 0.05 * (mean + sens * rec[t] - x[t - 1]) + vol * rng.standard_normal()
        return np.maximum(x, 0.05)

    monthly = {
        "cpi": level(0.003, 0.002, 0.1),
        "unemployment_rate": rate(5.5, 0.15, 3.0),
        "ppi": level(0.003, 0.006, 0.4),
        "sentiment": level(0.0, 0.03, 1.5),
        "recessions": rec.astype(float),
        "oil": level(0.004, 0.05, 2.0),
    }
    out = {}
    for name, vals in monthly.items():
        _write(directory / f"{name}.csv", months, vals)
        out[name] = (f"{name}.csv", "monthly")

    quarters = months[months.month.isin([1, 4, 7, 10])]
    qpos = np.searchsorted(months, quarters)
    for name, sens in (("gdp", 0.5), ("gdp_invest", 2.0)):
        vals = level(0.0025, 0.004, sens)[qpos]
        _write(directory / f"{name}.csv", quarters, vals)
        out[name] = (f"{name}.csv", "quarterly")

    days = pd.bdate_range(RAW_START, "2023-11-30")
    month_of_day = np.searchsorted(months, days.to_period("M").to_timestamp(), side="right") - 1
    fed = rate(5.0, 0.25, -2.5)[month_of_day] + 0.02 * rng.standard_normal(len(days))
    dgs10 = rate(6.0, 0.15, -1.0)[month_of_day] + 0.02 * rng.standard_normal(len(days))
    sp = level(0.006, 0.04, 3.0)[month_of_day] * np.exp(0.005 * rng.standard_normal(len(days)))
    holidays = rng.random(len(days)) < 0.02
    for name, vals in (("fedfunds", fed), ("dgs10", dgs10), ("sp500", sp)):
        vals = vals.copy()
        vals[holidays] = np.nan
        _write(directory / f"{name}.csv", days, vals)
        out[name] = (f"{name}.csv", "daily")
    return out


CONFIG_TEMPLATE = """\
[data]
target = inflation_rate
start = {start}
end = {end}
label = recessions

[output]
dir = out

[series.inflation_rate]
source = raw/cpi.csv
transform = pct_change_year

[series.unemployment_rate]
source = raw/unemployment_rate.csv

[series.federal_funds_rate]
source = raw/fedfunds.csv
method = aggregate_mean

[series.market_yield_10_rate]
source = raw/dgs10.csv
method = aggregate_mean

[series.ppi_rate]
source = raw/ppi.csv
transform = pct_change_year

[series.gdp_pc1]
source = raw/gdp.csv
method = interpolate_linear
transform = pct_change_year

[series.gdp_invest_pc1]
source = raw/gdp_invest.csv
method = interpolate_linear
transform = pct_change_year

[series.sp500_yoy]
source = raw/sp500.csv
method = aggregate_mean
transform = pct_change_year
scale = fraction

[series.consumer_senti_pc1]
source = raw/sentiment.csv
transform = pct_change_year

[series.recessions]
source = raw/recessions.csv
role = label

[series.oil]
source = raw/oil.csv
transform = pct_change_year
role = exclude

[hmm]
n_states = 4
seed = 0
max_iter = 100

[model]
n_lags = 24
horizon = 1
epochs = {epochs}
hidden1 = {hidden}
hidden2 = {hidden}
dense = 4
seed = 0
folds = 5

[forecast]
mode = all
horizon = 12
n_lags = 48
ensemble_size = 3
epochs = {epochs}

[explain]
mode = means
m = 50
"""


def write_project(root: Path, epochs: int = 2, hidden: int = 6, seed: int = 0) -> Path:
    """Raw sources under ``root/raw`` plus ``root/run.ini``; returns the config path."""
    write_sources(root / "raw", seed)
    cfg = root / "run.ini"
    cfg.write_text(CONFIG_TEMPLATE.format(start=START, end=END, epochs=epochs, hidden=hidden))
    return cfg
