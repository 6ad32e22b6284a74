"""Diagonal-covariance Gaussian HMM: EM fitting, decoding and feature fusion."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .errors import DataError, DegenerateError
from .ingest import SeriesTable

VARIANCE_FLOOR = 1e-4
PSEUDOCOUNT = 1.0
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianHmm:
    """K-state HMM with one mean and one variance per state and feature."""

    init_prob: np.ndarray
    trans: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    feature_names: list[str] | None = None
    seed: int | None = None

    def __post_init__(self):
        self.init_prob = np.asarray(self.init_prob, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.variances = np.atleast_2d(np.asarray(self.variances, dtype=float))
        k, d = self.means.shape
        if self.init_prob.shape != (k,) or self.trans.shape != (k, k) or self.variances.shape != (k, d):
            raise DataError("inconsistent HMM parameter shapes")
        if np.any(self.variances <= 0):
            raise DataError("HMM variances must be positive")
        if self.feature_names is not None:
            self.feature_names = list(self.feature_names)
            if len(self.feature_names) != d:
                raise DataError("feature_names length does not match model dimension")

    @property
    def n_states(self) -> int:
        return self.means.shape[0]

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def log_emission(self, obs: np.ndarray) -> np.ndarray:
        """``log N(o_t; mu_k, diag(var_k))`` as an N x K matrix."""
        obs = _check_obs(self, obs)
        diff = obs[:, None, :] - self.means[None, :, :]
        return -0.5 * (
            np.sum(_LOG_2PI + np.log(self.variances), axis=1)[None, :]
            + np.sum(diff**2 / self.variances[None, :, :], axis=2)
        )

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        states = np.empty(n, dtype=int)
        states[0] = rng.choice(self.n_states, p=self.init_prob)
        for t in range(1, n):
            states[t] = rng.choice(self.n_states, p=self.trans[states[t - 1]])
        noise = rng.standard_normal((n, self.n_features))
        obs = self.means[states] + noise * np.sqrt(self.variances[states])
        return states, obs

    def to_dict(self) -> dict:
        return {
            "K": self.n_states,
            "pi": self.init_prob.tolist(),
            "A": self.trans.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "feature_names": self.feature_names,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianHmm":
        model = cls(doc["pi"], doc["A"], doc["means"], doc["variances"], doc.get("feature_names"), doc.get("seed"))
        if model.n_states != doc["K"]:
            raise DataError("K does not match parameter shapes")
        return model

    def to_json(self) -> str:
        # repr(float) is the shortest string that round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GaussianHmm":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GaussianHmm":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass
class DecodedPath:
    states: np.ndarray
    log_likelihood: float
    dates: pd.DatetimeIndex | None = None

    def __len__(self) -> int:
        return len(self.states)

    def to_frame(self, stable_state: int = 0) -> pd.DataFrame:
        frame = pd.DataFrame(
            {"state": self.states, "binary_state": (self.states != stable_state).astype(int)}
        )
        if self.dates is not None:
            frame.insert(0, "date", self.dates.strftime("%Y-%m-%d"))
        return frame


def _check_obs(model: GaussianHmm, obs) -> np.ndarray:
    obs = np.asarray(obs, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if obs.ndim != 2 or obs.shape[1] != model.n_features:
        raise DataError(f"observation dimension {obs.shape} does not match model D={model.n_features}")
    if not np.isfinite(obs).all():
        raise DataError("observations contain non-finite values")
    return obs


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def _lse_rows(x: np.ndarray, axis: int) -> np.ndarray:
    # logsumexp without scipy's per-call overhead; all -inf slices stay -inf
    m = x.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.exp(x - m).sum(axis=axis, keepdims=True))).squeeze(axis)


def forward_backward(model: GaussianHmm, obs) -> dict:
    """Log-space forward-backward pass.

    Returns a dict with ``gamma`` (N x K state posteriors), ``xi`` ((N-1) x K x K
    pair posteriors) and ``log_likelihood``.
    """
    log_b = model.log_emission(obs)
    n, k = log_b.shape
    if n < 2:
        raise DataError("forward_backward needs at least 2 observations")
    log_a = _log(model.trans)
    log_alpha = np.empty((n, k))
    log_beta = np.zeros((n, k))
    log_alpha[0] = _log(model.init_prob) + log_b[0]
    for t in range(1, n):
        log_alpha[t] = _lse_rows(log_alpha[t - 1][:, None] + log_a, 0) + log_b[t]
    for t in range(n - 2, -1, -1):
        log_beta[t] = _lse_rows(log_a + (log_b[t + 1] + log_beta[t + 1])[None, :], 1)
    loglik = float(logsumexp(log_alpha[-1]))

    log_gamma = log_alpha + log_beta
    log_gamma -= logsumexp(log_gamma, axis=1, keepdims=True)
    log_xi = (
        log_alpha[:-1, :, None]
        + log_a[None, :, :]
        + (log_b[1:] + log_beta[1:])[:, None, :]
    )
    log_xi -= logsumexp(log_xi, axis=(1, 2), keepdims=True)
    return {"gamma": np.exp(log_gamma), "xi": np.exp(log_xi), "log_likelihood": loglik}


def viterbi(model: GaussianHmm, obs) -> DecodedPath:
    """Most probable state sequence; ties resolve to the lower state index."""
    log_b = model.log_emission(obs)
    n, k = log_b.shape
    log_a = _log(model.trans)
    delta = _log(model.init_prob) + log_b[0]
    back = np.zeros((n, k), dtype=int)
    for t in range(1, n):
        scores = delta[:, None] + log_a
        back[t] = np.argmax(scores, axis=0)
        delta = scores[back[t], np.arange(k)] + log_b[t]
    states = np.empty(n, dtype=int)
    states[-1] = int(np.argmax(delta))
    for t in range(n - 1, 0, -1):
        states[t - 1] = back[t, states[t]]
    return DecodedPath(states, float(delta[states[-1]]))


def path_log_prob(model: GaussianHmm, obs, states):
    """Joint log-probability of ``states`` and ``obs``, accumulated in the same
    order as :func:`viterbi` so the two agree bit for bit.

    ``states`` may be one path (returns a float) or a P x N array of paths
    (returns P scores).
    """
    log_b = model.log_emission(obs)
    log_a = _log(model.trans)
    states = np.asarray(states)
    single = states.ndim == 1
    paths = np.atleast_2d(states)
    if paths.shape[1] != log_b.shape[0]:
        raise DataError("state path length does not match observations")
    score = _log(model.init_prob)[paths[:, 0]] + log_b[0, paths[:, 0]]
    for t in range(1, paths.shape[1]):
        score = (score + log_a[paths[:, t - 1], paths[:, t]]) + log_b[t, paths[:, t]]
    return float(score[0]) if single else score


def stationary_distribution(trans) -> np.ndarray:
    """Solve ``pi A = pi`` with ``sum(pi) = 1`` by least squares."""
    a = np.asarray(trans, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError("transition matrix must be square")
    if np.any(a < -1e-12) or not np.allclose(a.sum(axis=1), 1.0, atol=1e-8):
        raise DataError("transition matrix is not row-stochastic")
    k = a.shape[0]
    system = np.vstack([a.T - np.eye(k), np.ones((1, k))])
    rhs = np.zeros(k + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _init_model(obs: np.ndarray, k: int, rng: np.random.Generator) -> GaussianHmm:
    """k-means++ seeding of the means on standardized observations."""
    n, d = obs.shape
    var = obs.var(axis=0)
    scale = np.sqrt(np.where(var > 0, var, 1.0))
    z = (obs - obs.mean(axis=0)) / scale
    centers = [int(rng.integers(n))]
    dist = np.sum((z - z[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = dist.sum()
        if total <= 0:
            raise DegenerateError("cannot seed distinct state means: observations are identical")
        nxt = int(rng.choice(n, p=dist / total))
        centers.append(nxt)
        dist = np.minimum(dist, np.sum((z - z[nxt]) ** 2, axis=1))
    means = obs[centers].copy()
    variances = np.tile(np.maximum(obs.var(axis=0, ddof=1), VARIANCE_FLOOR), (k, 1))
    return GaussianHmm(np.full(k, 1.0 / k), np.full((k, k), 1.0 / k), means, variances)


def _log_prior(model: GaussianHmm, pseudocount: float) -> float:
    if pseudocount == 0:
        return 0.0
    with np.errstate(divide="ignore"):
        return float(pseudocount * (np.sum(np.log(model.init_prob)) + np.sum(np.log(model.trans))))


def canonicalize(model: GaussianHmm) -> tuple[GaussianHmm, np.ndarray]:
    """Reorder states by stationary probability (descending), ties broken by
    the first feature's mean (ascending). Returns the model and the order used
    (``order[new] = old``)."""
    pi = np.round(stationary_distribution(model.trans), 12)
    order = np.lexsort((model.means[:, 0], -pi))
    reordered = GaussianHmm(
        model.init_prob[order],
        model.trans[np.ix_(order, order)],
        model.means[order],
        model.variances[order],
        model.feature_names,
        model.seed,
    )
    return reordered, order


@dataclass
class FitResult:
    model: GaussianHmm
    loglik_trace: np.ndarray
    converged: bool = False
    n_iter: int = 0
    history: list = field(default_factory=list, repr=False)


def fit_em(
    obs,
    n_states: int = 4,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    pseudocount: float = PSEUDOCOUNT,
    variance_floor: float = VARIANCE_FLOOR,
    init: GaussianHmm | None = None,
    feature_names=None,
) -> FitResult:
    """Baum-Welch with Dirichlet smoothing on the initial and transition rows.

    ``loglik_trace[i]`` is the penalized objective (data log-likelihood plus the
    Dirichlet log-prior) of the parameters entering iteration ``i``; this is the
    quantity EM is guaranteed not to decrease. Iteration stops once the gain
    falls below ``tol``. States are canonically reordered before returning.
    """
    obs = np.asarray(obs, dtype=float)
    if obs.ndim == 1:
        obs = obs[:, None]
    if n_states < 1:
        raise DataError("number of states must be at least 1")
    n, d = obs.shape
    if n <= n_states:
        raise DataError(f"need more observations ({n}) than states ({n_states})")
    if not np.isfinite(obs).all():
        raise DataError("observations contain non-finite values")
    if np.all(obs == obs[0]):
        raise DegenerateError("degenerate data: all observation rows are identical")

    rng = np.random.default_rng(seed)
    model = init if init is not None else _init_model(obs, n_states, rng)
    if model.n_states != n_states or model.n_features != d:
        raise DataError("initial model does not match n_states / observation dimension")
    model = GaussianHmm(model.init_prob, model.trans, model.means, model.variances, feature_names, seed)

    trace = []
    converged = False
    for _ in range(max_iter):
        post = forward_backward(model, obs)
        objective = post["log_likelihood"] + _log_prior(model, pseudocount)
        if trace and objective - trace[-1] < tol:
            trace.append(objective)
            converged = True
            break
        trace.append(objective)

        gamma, xi = post["gamma"], post["xi"]
        pi = gamma[0] + pseudocount
        trans = xi.sum(axis=0) + pseudocount
        weights = gamma.sum(axis=0)
        if np.any(weights <= 1e-12):
            raise DegenerateError("an HMM state lost all posterior mass")
        means = (gamma.T @ obs) / weights[:, None]
        sq = np.stack([gamma[:, j] @ (obs - means[j]) ** 2 for j in range(n_states)])
        variances = np.maximum(sq / weights[:, None], variance_floor)
        model = GaussianHmm(
            pi / pi.sum(),
            trans / trans.sum(axis=1, keepdims=True),
            means,
            variances,
            feature_names,
            seed,
        )

    model, _ = canonicalize(model)
    return FitResult(model, np.asarray(trace), converged, len(trace))


def binarize_states(path, stable_state: int = 0, n_states: int | None = None) -> np.ndarray:
    states = np.asarray(path.states if isinstance(path, DecodedPath) else path)
    k = n_states if n_states is not None else int(states.max()) + 1
    if not 0 <= stable_state < k:
        raise DataError(f"stable_state {stable_state} outside [0, {k})")
    return (states != stable_state).astype(int)


@dataclass
class ClassificationReport:
    """Per-class precision/recall/f1/support plus accuracy and averages."""

    classes: list
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float

    @property
    def macro(self) -> dict:
        return {"precision": self.precision.mean(), "recall": self.recall.mean(), "f1": self.f1.mean()}

    @property
    def weighted(self) -> dict:
        w = self.support / self.support.sum()
        return {"precision": w @ self.precision, "recall": w @ self.recall, "f1": w @ self.f1}

    def to_frame(self) -> pd.DataFrame:
        n = int(self.support.sum())
        rows = [
            [str(float(c)), p, r, f, int(s)]
            for c, p, r, f, s in zip(self.classes, self.precision, self.recall, self.f1, self.support)
        ]
        rows.append(["accuracy", np.nan, np.nan, self.accuracy, n])
        rows.append(["macro avg", *self.macro.values(), n])
        rows.append(["weighted avg", *self.weighted.values(), n])
        return pd.DataFrame(rows, columns=["label", "precision", "recall", "f1-score", "support"])


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def classification_report(pred, truth) -> ClassificationReport:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DataError("prediction and truth lengths differ")
    for arr in (pred, truth):
        if not np.isin(arr, (0, 1)).all():
            raise DataError("classification inputs must be 0/1")
    classes = [0, 1]
    precision, recall, f1, support = [], [], [], []
    for c in classes:
        tp = np.sum((pred == c) & (truth == c))
        n_pred = np.sum(pred == c)
        n_true = np.sum(truth == c)
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_true if n_true else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f1_score(p, r))
        support.append(n_true)
    return ClassificationReport(
        classes,
        np.array(precision, dtype=float),
        np.array(recall, dtype=float),
        np.array(f1, dtype=float),
        np.array(support, dtype=int),
        float(np.mean(pred == truth)),
    )


STATE_COLUMN = "hidden_state"
MODES = ("original", "states", "means", "all")


def augment_features(table: SeriesTable, model: GaussianHmm, path: DecodedPath, mode: str) -> SeriesTable:
    """Append the decoded state and/or the decoded state's mean vector.

    ``states`` adds one integer column, ``means`` adds one ``mean_<feature>``
    column per model feature, ``all`` adds both. ``original`` returns the table
    unchanged.
    """
    if mode not in MODES:
        raise DataError(f"unknown dataset mode {mode!r}")
    if len(path) != len(table):
        raise DataError(f"decoded path length {len(path)} does not match table rows {len(table)}")
    if path.dates is not None and not path.dates.equals(table.index):
        raise DataError("decoded path dates are not aligned to the table")
    if model.n_features != len(table.columns):
        raise DataError(f"model dimension {model.n_features} != table feature count {len(table.columns)}")
    frame = table.frame.copy()
    if mode == "original":
        return SeriesTable(frame, table.target_name)
    states = np.asarray(path.states)
    if mode in ("states", "all"):
        frame[STATE_COLUMN] = states.astype(float)
    if mode in ("means", "all"):
        names = model.feature_names or table.columns
        for j, name in enumerate(names):
            frame[f"mean_{name}"] = model.means[states, j]
    return SeriesTable(frame, table.target_name)


def decode_table(model: GaussianHmm, table: SeriesTable) -> DecodedPath:
    path = viterbi(model, table.values)
    path.dates = table.index
    return path


def markov_summary(model: GaussianHmm) -> pd.DataFrame:
    """Transition matrix with the stationary probability as an extra column."""
    k = model.n_states
    frame = pd.DataFrame(model.trans, index=[f"state_{i}" for i in range(k)], columns=[f"to_{i}" for i in range(k)])
    frame["stationary"] = stationary_distribution(model.trans)
    frame.index.name = "from"
    return frame
