"""Seeded synthetic regime-switching datasets for tests and demos."""
from __future__ import annotations

import numpy as np
import pandas as pd

from .ingest import SeriesTable
from .regime import GaussianHmm

# sticky 4-state chain; state 0 is the most persistent "calm" regime
REGIME_TRANS = np.array(
    [
        [0.97, 0.01, 0.01, 0.01],
        [0.03, 0.94, 0.02, 0.01],
        [0.02, 0.02, 0.95, 0.01],
        [0.03, 0.01, 0.01, 0.95],
    ]
)
REGIME_LEVEL = np.array([2.5, 7.0, -0.5, 4.5])
REGIME_NOISE = np.array([0.3, 0.6, 0.4, 0.5])
AR_COEF = 0.6


def regime_dataset(
    n: int = 650,
    seed: int = 0,
    n_covariates: int = 8,
    covariate_noise: float = 1.5,
    start: str = "1970-01-01",
) -> tuple[SeriesTable, np.ndarray]:
    """Target = regime-dependent AR(1) around a per-state level; covariates =
    per-state means plus Gaussian noise. Returns the table and true states."""
    rng = np.random.default_rng(seed)
    k = len(REGIME_LEVEL)
    chain = GaussianHmm(np.full(k, 1.0 / k), REGIME_TRANS, np.zeros((k, 1)), np.ones((k, 1)))
    states, _ = chain.sample(n, rng)
    cov_means = rng.normal(0.0, 2.0, size=(k, n_covariates))
    y = np.empty(n)
    prev = REGIME_LEVEL[states[0]]
    for t in range(n):
        s = states[t]
        prev = REGIME_LEVEL[s] + AR_COEF * (prev - REGIME_LEVEL[s]) + REGIME_NOISE[s] * rng.standard_normal()
        y[t] = prev
    covariates = cov_means[states] + covariate_noise * rng.standard_normal((n, n_covariates))
    columns = {"target": y}
    for j in range(n_covariates):
        columns[f"x{j + 1}"] = covariates[:, j]
    index = pd.date_range(start, periods=n, freq="MS", name="date")
    return SeriesTable(pd.DataFrame(columns, index=index), "target"), states


def two_state_hmm(separation: float = 10.0, dim: int = 1) -> GaussianHmm:
    """Well-separated 2-state diagonal model (means +-separation/2, unit variance)."""
    half = separation / 2.0
    return GaussianHmm(
        np.array([0.5, 0.5]),
        np.array([[0.9, 0.1], [0.2, 0.8]]),
        np.array([[-half] * dim, [half] * dim]),
        np.ones((2, dim)),
    )


def random_hmm(rng: np.random.Generator, k: int, d: int) -> GaussianHmm:
    pi = rng.dirichlet(np.ones(k))
    trans = rng.dirichlet(np.ones(k), size=k)
    means = rng.normal(0.0, 2.0, size=(k, d))
    variances = rng.uniform(0.3, 2.0, size=(k, d))
    return GaussianHmm(pi, trans, means, variances)
