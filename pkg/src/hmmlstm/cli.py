"""Command-line driver: ``hmmlstm <fetch|hmm|train|cv|forecast|explain|report> --config run.ini``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
degeneracy.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd
from filelock import FileLock, Timeout

from . import plots
from .attribution import attribute_samples
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, DegenerateError
from .forecast import compare_configs, forecast_horizon
from .ingest import (
    SeriesTable,
    adf_table,
    align,
    build_series,
    correlation_matrix,
    fetch_csv,
    summary_stats,
)
from .network import LstmNetwork, mode_table, run_experiment
from .pipeline import make_supervised, split_index
from .regime import (
    GaussianHmm,
    binarize_states,
    classification_report,
    decode_table,
    fit_em,
    markov_summary,
    stationary_distribution,
)

log = logging.getLogger("hmmlstm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DEGENERATE = 0, 2, 3, 4
CACHE_ENV = "HMMLSTM_CACHE"
FLOAT_FMT = "%.17g"


def _write_csv(frame: pd.DataFrame, path: Path, index: bool = False) -> None:
    frame.to_csv(path, index=index, float_format=FLOAT_FMT, lineterminator="\n")


def _write_text(text: str, path: Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _load_dataset(cfg: RunConfig) -> tuple[SeriesTable, np.ndarray | None]:
    path = cfg.out_dir / "dataset.csv"
    if not path.exists():
        raise DataError(f"dataset not found at {path}; run `fetch` first")
    table = SeriesTable.from_csv(path, cfg.target)
    labels = None
    if cfg.label and cfg.label in table.columns:
        labels = table.frame[cfg.label].to_numpy().astype(int)
        table = table.drop([cfg.label])
    excluded = [s.name for s in cfg.series if s.role == "exclude" and s.name in table.columns]
    if excluded:
        table = table.drop(excluded)
    return table, labels


def _load_hmm(cfg: RunConfig, table: SeriesTable):
    path = cfg.out_dir / "hmm_model.json"
    if not path.exists():
        raise DataError(f"HMM model not found at {path}; run `hmm` first")
    model = GaussianHmm.load(path)
    return model, decode_table(model, table)


def _needs_hmm(modes) -> bool:
    return any(m != "original" for m in modes)


def cmd_fetch(cfg: RunConfig) -> None:
    if not cfg.series:
        raise ConfigError("no [series.*] sections configured")
    cache = os.environ.get(CACHE_ENV)
    monthly = {}
    for s in cfg.series:
        try:
            raw = fetch_csv(cfg.resolve(s.source), s.name, s.frequency, cache_dir=cache)
            monthly[s.name] = build_series(raw, s.transform, s.scale, s.method, end=cfg.end or None)
        except DataError as exc:
            raise DataError(f"series {s.name}: {exc}") from exc
    table = align(monthly, cfg.start or None, cfg.end or None, cfg.target)
    table.to_csv(cfg.out_dir / "dataset.csv")
    features = table.drop([cfg.label]) if cfg.label in table.columns else table
    _write_csv(summary_stats(table), cfg.out_dir / "summary_stats.csv", index=True)
    _write_csv(correlation_matrix(features), cfg.out_dir / "correlations.csv", index=True)
    _write_csv(adf_table(features), cfg.out_dir / "adf.csv")
    log.info("wrote %d-row dataset with %d columns", len(table), len(table.columns))
    print(f"dataset: {len(table)} rows x {len(table.columns)} columns -> {cfg.out_dir / 'dataset.csv'}")


def cmd_hmm(cfg: RunConfig) -> None:
    table, labels = _load_dataset(cfg)
    h = cfg.hmm
    fit = fit_em(table.values, h.n_states, h.seed, h.max_iter, h.tol, h.pseudocount, h.variance_floor,
                 feature_names=table.columns)
    model = fit.model
    model.save(cfg.out_dir / "hmm_model.json")
    path = decode_table(model, table)
    if not 0 <= h.stable_state < model.n_states:
        raise ConfigError(f"hmm.stable_state {h.stable_state} outside [0, {model.n_states})")
    _write_csv(path.to_frame(h.stable_state), cfg.out_dir / "decoded_path.csv")
    _write_csv(markov_summary(model), cfg.out_dir / "markov_summary.csv", index=True)
    _write_csv(pd.DataFrame({"iteration": np.arange(len(fit.loglik_trace)), "objective": fit.loglik_trace}),
               cfg.out_dir / "hmm_trace.csv")
    means = pd.DataFrame(model.means, columns=table.columns)
    means.index.name = "state"
    _write_csv(means, cfg.out_dir / "state_means.csv", index=True)
    if labels is not None:
        pred = binarize_states(path, h.stable_state, model.n_states)
        report = classification_report(pred, labels)
        _write_csv(report.to_frame(), cfg.out_dir / "classification_report.csv")
        print(f"accuracy vs {cfg.label}: {report.accuracy:.2f}")
    pi = stationary_distribution(model.trans)
    print("stationary distribution: " + ", ".join(f"State {i}: {p:.3f}" for i, p in enumerate(pi)))


def _train_kwargs(m) -> dict:
    return dict(n_lags=m.n_lags, horizon=m.horizon, epochs=m.epochs, batch_size=m.batch_size, lr=m.lr,
                seed=m.seed, hidden1=m.hidden1, hidden2=m.hidden2, dense=m.dense, clip_norm=m.clip_norm,
                weight_decay=m.weight_decay)


def cmd_train(cfg: RunConfig) -> None:
    table, _ = _load_dataset(cfg)
    modes = cfg.model.mode_list
    hmm, path = _load_hmm(cfg, table) if _needs_hmm(modes) else (None, None)
    metrics = {}
    preds = {}
    losses = {}
    for mode in modes:
        res = run_experiment(table, mode, hmm, path, cfg.model.train_fraction, cfg.model.split_date or None,
                             **_train_kwargs(cfg.model))
        metrics[mode] = res.metrics.as_dict()
        frame = res.predictions_frame()
        _write_csv(frame, cfg.out_dir / f"predictions_{mode}.csv")
        _write_csv(pd.DataFrame({"epoch": np.arange(1, res.report.epochs_run + 1), "mse": res.report.loss_curve}),
                   cfg.out_dir / f"loss_{mode}.csv")
        res.network.save(cfg.out_dir / f"model_{mode}.json")
        preds[mode] = frame
        losses[mode] = res.report.loss_curve
    table2 = pd.DataFrame(metrics)
    table2.index.name = "metric"
    _write_csv(table2, cfg.out_dir / "metrics.csv", index=True)
    first = next(iter(preds.values()))
    series = {"actual": first["y_true"].to_numpy()}
    series.update({m: f["y_pred"].to_numpy() for m, f in preds.items()})
    dates = list(first["date"])
    _write_text(plots.line_chart(series, "In-sample prediction", [dates[0], dates[-1]]),
                cfg.out_dir / "predictions.svg")
    _write_text(plots.line_chart(losses, "Training loss"), cfg.out_dir / "loss_curves.svg")
    print(table2.to_string(float_format=lambda v: f"{v:.3f}"))


def cmd_cv(cfg: RunConfig) -> None:
    table, _ = _load_dataset(cfg)
    modes = cfg.model.mode_list
    hmm, path = _load_hmm(cfg, table) if _needs_hmm(modes) else (None, None)
    comp = compare_configs(table, modes, hmm, path, n_folds=cfg.model.folds, **_train_kwargs(cfg.model))
    _write_csv(comp.frame, cfg.out_dir / "metrics_cv.csv", index=True)
    for mode, results in comp.results.items():
        frames = []
        for fold, res in enumerate(results, 1):
            _write_csv(pd.DataFrame({"epoch": np.arange(1, res.report.epochs_run + 1), "mse": res.report.loss_curve}),
                       cfg.out_dir / f"loss_cv_{mode}_fold{fold}.csv")
            f = res.predictions_frame()
            f.insert(1, "fold", fold)
            frames.append(f)
        _write_csv(pd.concat(frames, ignore_index=True), cfg.out_dir / f"predictions_cv_{mode}.csv")
    print(comp.frame.to_string(float_format=lambda v: f"{v:.3f}"))


def cmd_forecast(cfg: RunConfig) -> None:
    table, _ = _load_dataset(cfg)
    f = cfg.forecast
    hmm, path = _load_hmm(cfg, table) if f.mode != "original" else (None, None)
    m = cfg.model
    res = forecast_horizon(
        table, f.mode, f.horizon, f.n_lags, f.ensemble_size, f.base_seed, hmm, path,
        epochs=f.epochs, batch_size=m.batch_size, lr=m.lr, hidden1=m.hidden1, hidden2=m.hidden2,
        dense=m.dense, clip_norm=m.clip_norm, band=(f.lower_pct, f.upper_pct),
    )
    _write_csv(res.to_frame(), cfg.out_dir / f"forecast_{f.mode}.csv")
    _write_csv(res.members_frame(), cfg.out_dir / f"forecast_members_{f.mode}.csv")
    history = table.frame[cfg.target].to_numpy()[-max(3 * f.horizon, 24):]
    _write_text(
        plots.fan_chart(history, res.point, res.lower, res.upper, f"{f.horizon}-month forecast ({f.mode})",
                        [str(table.index[-len(history)].date()), str(res.horizon_dates[-1].date())]),
        cfg.out_dir / f"forecast_{f.mode}.svg",
    )
    print(res.to_frame().to_string(index=False, float_format=lambda v: f"{v:.3f}"))


def cmd_explain(cfg: RunConfig) -> None:
    table, _ = _load_dataset(cfg)
    e = cfg.explain
    bundle = cfg.out_dir / f"model_{e.mode}.json"
    if not bundle.exists():
        raise DataError(f"trained model not found at {bundle}; run `train` with mode {e.mode}")
    net = LstmNetwork.load(bundle)
    hmm, path = _load_hmm(cfg, table) if e.mode != "original" else (None, None)
    data = mode_table(table, e.mode, hmm, path)
    if net.scaler is None:
        raise DataError("model bundle has no scaler")
    scaled = SeriesTable(
        pd.DataFrame(net.scaler.transform(data.values), index=data.index, columns=data.columns), data.target_name
    )
    cfgn = net.config
    tensor = make_supervised(scaled, cfgn.n_lags, cfgn.horizon)
    if cfg.model.split_date:
        cut = int(np.searchsorted(np.asarray(tensor.sample_dates), np.datetime64(pd.Timestamp(cfg.model.split_date))))
    else:
        cut = split_index(len(tensor), cfg.model.train_fraction)
    test = tensor.subset(cut, len(tensor))
    amap = attribute_samples(net, test.X, e.baseline, e.m, e.output_index, data.columns, test.sample_dates,
                             train_X=tensor.X[:cut])
    _write_csv(amap.long_frame(), cfg.out_dir / f"attributions_{e.mode}.csv")
    mean = amap.mean_by_feature(e.magnitude)
    _write_csv(pd.DataFrame({"feature": mean.index, "mean_value": mean.to_numpy()}),
               cfg.out_dir / f"attributions_mean_{e.mode}.csv")
    _write_text(plots.bar_chart(mean.index, mean.to_numpy(), f"Average feature importance ({e.mode})"),
                cfg.out_dir / f"attributions_{e.mode}.svg")
    print(mean.to_string(float_format=lambda v: f"{v:.4g}"))


def cmd_report(cfg: RunConfig) -> None:
    """Collect every tabular artifact present into ``report.md``."""
    sections = [
        ("Summary statistics", "summary_stats.csv"),
        ("ADF tests", "adf.csv"),
        ("Markov chain", "markov_summary.csv"),
        ("Classification report", "classification_report.csv"),
        ("Metrics (train/test split)", "metrics.csv"),
        ("Metrics (forward-chaining CV)", "metrics_cv.csv"),
    ]
    sections += [(f"Forecast ({p.stem[9:]})", p.name) for p in sorted(cfg.out_dir.glob("forecast_*.csv"))
                 if not p.name.startswith("forecast_members_")]
    sections += [(f"Mean attributions ({p.stem[18:]})", p.name) for p in sorted(cfg.out_dir.glob("attributions_mean_*.csv"))]
    lines = ["# Run report", ""]
    found = 0
    for title, name in sections:
        path = cfg.out_dir / name
        if not path.exists():
            continue
        found += 1
        frame = pd.read_csv(path)
        lines += [f"## {title}", "", _markdown_table(frame), ""]
    if not found:
        raise DataError(f"no artifacts found in {cfg.out_dir}")
    _write_text("\n".join(lines), cfg.out_dir / "report.md")
    print(f"report: {found} sections -> {cfg.out_dir / 'report.md'}")


def _markdown_table(frame: pd.DataFrame) -> str:
    def cell(v):
        if isinstance(v, float):
            return "" if np.isnan(v) else f"{v:.4f}"
        return str(v)

    header = "| " + " | ".join(str(c) for c in frame.columns) + " |"
    rule = "|" + "|".join("---" for _ in frame.columns) + "|"
    body = ["| " + " | ".join(cell(v) for v in row) + " |" for row in frame.itertuples(index=False)]
    return "\n".join([header, rule, *body])


COMMANDS = {
    "fetch": cmd_fetch,
    "hmm": cmd_hmm,
    "train": cmd_train,
    "cv": cmd_cv,
    "forecast": cmd_forecast,
    "explain": cmd_explain,
    "report": cmd_report,
}


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    cmd = args.command
    if args.out:
        cfg.out_dir = Path(args.out)
    if args.mode:
        cfg.model.modes = args.mode
        cfg.forecast.mode = args.mode
        cfg.explain.mode = args.mode
    if args.seed is not None:
        if cmd == "hmm":
            cfg.hmm.seed = args.seed
        elif cmd == "forecast":
            cfg.forecast.base_seed = args.seed
        else:
            cfg.model.seed = args.seed
    if args.horizon is not None:
        if cmd == "forecast":
            cfg.forecast.horizon = args.horizon
        else:
            cfg.model.horizon = args.horizon
    if args.lags is not None:
        if cmd == "forecast":
            cfg.forecast.n_lags = args.lags
        else:
            cfg.model.n_lags = args.lags
    if args.folds is not None:
        cfg.model.folds = args.folds
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmmlstm", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", "-c", required=True, help="INI run configuration")
    parser.add_argument("--mode", help="dataset mode: original, states, means or all")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--lags", type=int)
    parser.add_argument("--folds", type=int)
    parser.add_argument("--out", help="output directory (overrides [output] dir)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        with FileLock(str(cfg.out_dir / ".lock"), timeout=0):
            _write_text(cfg.to_ini(), cfg.out_dir / "resolved_config.ini")
            COMMANDS[args.command](cfg)
    except Timeout:
        print("error: another run holds the output directory lock", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
