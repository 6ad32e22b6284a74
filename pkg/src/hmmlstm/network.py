"""Stacked LSTM regressor in plain numpy: forward pass, BPTT, Adam, training.

Architecture: LSTM(H1, full sequence) -> LSTM(H2, last step) -> Dense(linear)
-> Dense head(linear, ``horizon`` outputs). Gate blocks are ordered
(input, forget, output, candidate) in every ``W``/``U``/``b``.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd
from scipy.special import expit

from .errors import DataError, DegenerateError
from .ingest import SeriesTable
from .pipeline import PreparedSplit, ScalerParams, SupervisedTensor, make_supervised, prepare_split, split_index
from .regime import DecodedPath, GaussianHmm, augment_features

PARAM_NAMES = ("W1", "U1", "b1", "W2", "U2", "b2", "Wd", "bd", "Wh", "bh")


@dataclass(frozen=True)
class NetworkConfig:
    n_features: int
    n_lags: int
    horizon: int = 1
    hidden1: int = 50
    hidden2: int = 50
    dense: int = 25

    def shapes(self) -> dict:
        h1, h2 = self.hidden1, self.hidden2
        return {
            "W1": (4 * h1, self.n_features),
            "U1": (4 * h1, h1),
            "b1": (4 * h1,),
            "W2": (4 * h2, h1),
            "U2": (4 * h2, h2),
            "b2": (4 * h2,),
            "Wd": (self.dense, h2),
            "bd": (self.dense,),
            "Wh": (self.horizon, self.dense),
            "bh": (self.horizon,),
        }

    def summary(self) -> list[tuple[str, tuple, tuple]]:
        """Layer table rows ``(layer, input shape, output shape)``; ``None`` is the batch axis."""
        L, D = self.n_lags, self.n_features
        return [
            ("lstm_input", (None, L, D), (None, L, D)),
            ("lstm", (None, L, D), (None, L, self.hidden1)),
            ("lstm", (None, L, self.hidden1), (None, self.hidden2)),
            ("dense", (None, self.hidden2), (None, self.dense)),
            ("dense", (None, self.dense), (None, self.horizon)),
        ]


def _glorot(rng, shape):
    fan_out, fan_in = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _orthogonal(rng, shape):
    a = rng.standard_normal(shape)
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


def _lstm_bias(hidden):
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return b


def cell_forward(x_t, h_prev, c_prev, W, U, b):
    """One LSTM step. Works on single vectors or on a batch of rows."""
    x_t, h_prev, c_prev = (np.asarray(a, dtype=float) for a in (x_t, h_prev, c_prev))
    for arr in (x_t, h_prev, c_prev):
        if not np.isfinite(arr).all():
            raise DataError("non-finite input to LSTM cell")
    H = U.shape[1]
    if x_t.shape[-1] != W.shape[1] or h_prev.shape[-1] != H or c_prev.shape[-1] != H:
        raise DataError("LSTM cell shape mismatch")
    z = x_t @ W.T + h_prev @ U.T + b
    i = expit(z[..., :H])
    f = expit(z[..., H : 2 * H])
    o = expit(z[..., 2 * H : 3 * H])
    g = np.tanh(z[..., 3 * H :])
    c = f * c_prev + i * g
    return o * np.tanh(c), c


def _lstm_layer_forward(X, W, U, b):
    n, L, _ = X.shape
    H = U.shape[1]
    xp = X @ W.T + b
    UT = U.T
    h = np.zeros((n, H))
    c = np.zeros((n, H))
    hs = np.empty((n, L, H))
    cs = np.empty((n, L, H))
    acts = np.empty((n, L, 4 * H))
    for t in range(L):
        z = xp[:, t] + h @ UT
        a = acts[:, t]
        a[:, : 3 * H] = expit(z[:, : 3 * H])
        a[:, 3 * H :] = np.tanh(z[:, 3 * H :])
        c = a[:, H : 2 * H] * c + a[:, :H] * a[:, 3 * H :]
        h = a[:, 2 * H : 3 * H] * np.tanh(c)
        hs[:, t] = h
        cs[:, t] = c
    return hs, {"X": X, "hs": hs, "cs": cs, "acts": acts}


def _lstm_layer_backward(cache, dhs, W, U, last_only=False):
    """BPTT through one layer. ``dhs`` is dLoss/dh_t for every step (or only
    the final step when ``last_only``). Returns (dW, dU, db, dX)."""
    X, hs, cs, acts = cache["X"], cache["hs"], cache["cs"], cache["acts"]
    n, L, H = hs.shape
    dZ = np.empty((n, L, 4 * H))
    dh_next = np.zeros((n, H))
    dc_next = np.zeros((n, H))
    for t in range(L - 1, -1, -1):
        if last_only:
            dh = dh_next + dhs if t == L - 1 else dh_next
        else:
            dh = dhs[:, t] + dh_next
        a = acts[:, t]
        i, f, o, g = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        tc = np.tanh(cs[:, t])
        c_prev = cs[:, t - 1] if t > 0 else 0.0
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = dZ[:, t]
        dz[:, :H] = dc * g * i * (1.0 - i)
        dz[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[:, 2 * H : 3 * H] = dh * tc * o * (1.0 - o)
        dz[:, 3 * H :] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = dz @ U
    D = X.shape[2]
    flat_dz = dZ.reshape(-1, 4 * H)
    dW = flat_dz.T @ X.reshape(-1, D)
    h_prev = np.concatenate([np.zeros((n, 1, H)), hs[:, :-1]], axis=1)
    dU = flat_dz.T @ h_prev.reshape(-1, H)
    db = flat_dz.sum(axis=0)
    dX = dZ @ W
    return dW, dU, db, dX


@dataclass
class TrainReport:
    loss_curve: list[float]
    epochs_run: int
    checksum: str


@dataclass
class LstmNetwork:
    config: NetworkConfig
    params: dict
    scaler: ScalerParams | None = None
    seed: int | None = None
    train_config: dict = field(default_factory=dict)

    @classmethod
    def init(cls, config: NetworkConfig, seed: int = 0) -> "LstmNetwork":
        """Glorot-uniform input/dense weights, orthogonal recurrent weights,
        forget-gate bias 1."""
        rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        s = config.shapes()
        params = {
            "W1": _glorot(rng, s["W1"]),
            "U1": _orthogonal(rng, s["U1"]),
            "b1": _lstm_bias(config.hidden1),
            "W2": _glorot(rng, s["W2"]),
            "U2": _orthogonal(rng, s["U2"]),
            "b2": _lstm_bias(config.hidden2),
            "Wd": _glorot(rng, s["Wd"]),
            "bd": np.zeros(s["bd"]),
            "Wh": _glorot(rng, s["Wh"]),
            "bh": np.zeros(s["bh"]),
        }
        return cls(config, params, seed=seed)

    @classmethod
    def zeros(cls, config: NetworkConfig) -> "LstmNetwork":
        return cls(config, {k: np.zeros(v) for k, v in config.shapes().items()})

    def _check_input(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            X = X[None]
        if X.ndim != 3 or X.shape[1:] != (self.config.n_lags, self.config.n_features):
            raise DataError(
                f"input shape {X.shape} does not match (n, {self.config.n_lags}, {self.config.n_features})"
            )
        return X

    def forward(self, X, return_cache: bool = False):
        X = self._check_input(X)
        p = self.params
        h1, c1 = _lstm_layer_forward(X, p["W1"], p["U1"], p["b1"])
        h2, c2 = _lstm_layer_forward(h1, p["W2"], p["U2"], p["b2"])
        last = h2[:, -1]
        dense = last @ p["Wd"].T + p["bd"]
        out = dense @ p["Wh"].T + p["bh"]
        if not return_cache:
            return out
        cache = {"layer1": c1, "layer2": c2, "last": last, "dense": dense, "out": out, "params": p}
        return out, cache

    def predict(self, X, batch_size: int = 256) -> np.ndarray:
        X = self._check_input(X)
        return np.concatenate([self.forward(X[i : i + batch_size]) for i in range(0, len(X), batch_size)])

    def backward_output(self, cache, dout) -> tuple[dict, np.ndarray]:
        """Backpropagate an arbitrary output cotangent ``dout`` (n x horizon).

        Returns parameter gradients and the gradient with respect to the input.
        """
        if cache.get("params") is not self.params:
            raise DataError("stale cache: parameters changed since the forward pass")
        p = self.params
        dout = np.asarray(dout, dtype=float)
        grads = {"Wh": dout.T @ cache["dense"], "bh": dout.sum(axis=0)}
        ddense = dout @ p["Wh"]
        grads["Wd"] = ddense.T @ cache["last"]
        grads["bd"] = ddense.sum(axis=0)
        dlast = ddense @ p["Wd"]
        grads["W2"], grads["U2"], grads["b2"], dh1 = _lstm_layer_backward(
            cache["layer2"], dlast, p["W2"], p["U2"], last_only=True
        )
        grads["W1"], grads["U1"], grads["b1"], dX = _lstm_layer_backward(cache["layer1"], dh1, p["W1"], p["U1"])
        return {k: grads[k] for k in PARAM_NAMES}, dX

    def backward(self, cache, y_true, clip_norm: float | None = None) -> tuple[float, dict]:
        """MSE loss and its gradients by backpropagation through time."""
        out = cache["out"]
        y_true = np.asarray(y_true, dtype=float).reshape(out.shape)
        resid = out - y_true
        loss = float(np.mean(resid**2))
        grads, _ = self.backward_output(cache, 2.0 * resid / resid.size)
        if clip_norm is not None:
            grads = clip_by_global_norm(grads, clip_norm)
        return loss, grads

    def loss_and_grads(self, X, y, clip_norm: float | None = None):
        _, cache = self.forward(X, return_cache=True)
        return self.backward(cache, y, clip_norm)

    def input_gradient(self, X, output_index: int = 0) -> np.ndarray:
        """Gradient of output ``output_index`` with respect to each input entry,
        one [L x D] slice per sample."""
        if not 0 <= output_index < self.config.horizon:
            raise DataError(f"output_index {output_index} outside horizon {self.config.horizon}")
        out, cache = self.forward(X, return_cache=True)
        dout = np.zeros_like(out)
        dout[:, output_index] = 1.0
        _, dX = self.backward_output(cache, dout)
        return dX

    def checksum(self) -> str:
        h = hashlib.sha256()
        for k in PARAM_NAMES:
            h.update(np.ascontiguousarray(self.params[k], dtype="<f8").tobytes())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "architecture": asdict(self.config),
            "weights": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.params.items()},
            "scaler": self.scaler.to_dict() if self.scaler is not None else None,
            "seed": self.seed,
            "config": self.train_config,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LstmNetwork":
        config = NetworkConfig(**doc["architecture"])
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in doc["weights"].items()}
        expected = config.shapes()
        for k in PARAM_NAMES:
            if params[k].shape != tuple(expected[k]):
                raise DataError(f"bundle weight {k} has shape {params[k].shape}, expected {expected[k]}")
        scaler = ScalerParams.from_dict(doc["scaler"]) if doc.get("scaler") else None
        return cls(config, params, scaler, doc.get("seed"), doc.get("config") or {})

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "LstmNetwork":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def clip_by_global_norm(grads: dict, max_norm: float) -> dict:
    norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm <= max_norm or norm == 0:
        return grads
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float = 1e-3,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> tuple[dict, AdamState]:
    """One bias-corrected Adam update. Inputs are left untouched."""
    for k, g in grads.items():
        if not np.isfinite(g).all():
            raise DegenerateError(f"non-finite gradient for {k}")
    t = state.t + 1
    new_params, m, v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, p in params.items():
        g = grads[k]
        m[k] = beta1 * state.m.get(k, 0.0) + (1.0 - beta1) * g
        v[k] = beta2 * state.v.get(k, 0.0) + (1.0 - beta2) * g * g
        new_params[k] = p - lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return new_params, AdamState(t, m, v)


def train(
    config: NetworkConfig,
    tensor: SupervisedTensor,
    epochs: int = 100,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
    clip_norm: float | None = 5.0,
    weight_decay: float = 0.0,
    scaler: ScalerParams | None = None,
) -> tuple[LstmNetwork, TrainReport]:
    """Mini-batch Adam on MSE. Batches are reshuffled each epoch with a
    generator derived from ``seed``; the loss curve holds the sample-weighted
    mean batch loss per epoch."""
    if len(tensor) == 0:
        raise DataError("cannot train on an empty tensor")
    if tensor.X.shape[1:] != (config.n_lags, config.n_features) or tensor.y.shape[1] != config.horizon:
        raise DataError("tensor shape does not match network configuration")
    net = LstmNetwork.init(config, seed)
    net.scaler = scaler
    net.train_config = {"epochs": epochs, "batch_size": batch_size, "lr": lr, "clip_norm": clip_norm,
                        "weight_decay": weight_decay}
    order_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[1])
    state = AdamState()
    n = len(tensor)
    curve = []
    for _ in range(epochs):
        order = order_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            loss, grads = net.loss_and_grads(tensor.X[idx], tensor.y[idx], clip_norm)
            if weight_decay:
                for k in ("W1", "U1", "W2", "U2", "Wd", "Wh"):
                    grads[k] = grads[k] + weight_decay * net.params[k]
            net.params, state = adam_step(net.params, grads, state, lr)
            total += loss * len(idx)
        curve.append(total / n)
        if not np.isfinite(curve[-1]):
            raise DegenerateError("training loss became non-finite")
    return net, TrainReport(curve, epochs, net.checksum())


@dataclass(frozen=True)
class RegressionMetrics:
    mse: float
    mae: float
    r2: float

    def as_dict(self) -> dict:
        return {"MSE": self.mse, "MAE": self.mae, "R2": self.r2}


def evaluate(y_true, y_pred) -> RegressionMetrics:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise DataError(f"shape mismatch {y_true.shape} vs {y_pred.shape}")
    resid = y_true - y_pred
    sst = float(np.sum((y_true - y_true.mean()) ** 2))
    if sst == 0:
        raise DegenerateError("y_true has zero variance; R^2 is undefined")
    sse = float(np.sum(resid**2))
    return RegressionMetrics(float(np.mean(resid**2)), float(np.mean(np.abs(resid))), 1.0 - sse / sst)


@dataclass
class ExperimentResult:
    mode: str
    metrics: RegressionMetrics
    dates: pd.DatetimeIndex
    y_true: np.ndarray
    y_pred: np.ndarray
    report: TrainReport
    network: LstmNetwork
    split: PreparedSplit = field(repr=False, default=None)

    def predictions_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": pd.DatetimeIndex(self.dates).strftime("%Y-%m-%d"),
                "y_true": self.y_true[:, 0],
                "y_pred": self.y_pred[:, 0],
            }
        )


def mode_table(table: SeriesTable, mode: str, hmm: GaussianHmm | None = None,
               path: DecodedPath | None = None) -> SeriesTable:
    if mode == "original":
        return table
    if hmm is None or path is None:
        raise DataError(f"mode {mode!r} needs a fitted HMM and decoded path")
    return augment_features(table, hmm, path, mode)


def fit_and_score(
    data: SeriesTable,
    train_samples: tuple[int, int],
    test_samples: tuple[int, int],
    n_lags: int = 24,
    horizon: int = 1,
    epochs: int = 100,
    batch_size: int = 32,
    lr: float = 1e-3,
    seed: int = 0,
    hidden1: int = 50,
    hidden2: int = 50,
    dense: int = 25,
    clip_norm: float | None = 5.0,
    weight_decay: float = 0.0,
    mode: str = "original",
) -> ExperimentResult:
    """Scale on training rows, train, predict the test samples and score them
    in original units."""
    split = prepare_split(data, n_lags, horizon, train_samples, test_samples)
    config = NetworkConfig(len(data.columns), n_lags, horizon, hidden1, hidden2, dense)
    net, report = train(config, split.train, epochs, batch_size, lr, seed, clip_norm, weight_decay, split.scaler)
    target_scaler = split.scaler.column(data.target_name)
    pred = target_scaler.inverse_transform(net.predict(split.test.X).reshape(-1, 1)).reshape(split.test.y.shape)
    raw = make_supervised(data, n_lags, horizon)
    y_true = raw.y[test_samples[0] : test_samples[1]]
    return ExperimentResult(mode, evaluate(y_true, pred), split.test.sample_dates, y_true, pred, report, net, split)


def run_experiment(
    table: SeriesTable,
    mode: str = "original",
    hmm: GaussianHmm | None = None,
    path: DecodedPath | None = None,
    train_fraction: float = 0.7,
    split_date=None,
    **kwargs,
) -> ExperimentResult:
    """Augment for ``mode``, then scale -> lag -> split -> train -> predict ->
    inverse-scale -> evaluate on a chronological split."""
    data = mode_table(table, mode, hmm, path)
    n_lags = kwargs.get("n_lags", 24)
    horizon = kwargs.get("horizon", 1)
    tensor = make_supervised(data, n_lags, horizon)
    n = len(tensor)
    if split_date is not None:
        cut = int(np.searchsorted(np.asarray(tensor.sample_dates), np.datetime64(pd.Timestamp(split_date))))
        if not 0 < cut < n:
            raise DataError(f"split date {split_date} leaves an empty partition")
    else:
        cut = split_index(n, train_fraction)
    return fit_and_score(data, (0, cut), (cut, n), mode=mode, **kwargs)
