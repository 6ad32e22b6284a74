import itertools

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import norm

from hmmlstm.errors import DataError, DegenerateError
from hmmlstm.ingest import SeriesTable
from hmmlstm.regime import (
    DecodedPath,
    GaussianHmm,
    augment_features,
    binarize_states,
    canonicalize,
    classification_report,
    decode_table,
    f1_score,
    fit_em,
    forward_backward,
    markov_summary,
    path_log_prob,
    stationary_distribution,
    viterbi,
)
from hmmlstm.synthetic import random_hmm, two_state_hmm


def joint_prob(model, obs, states):
    """Plain-probability product p(S, O) for the enumeration oracle."""
    obs = np.atleast_2d(obs.T).T
    dens = lambda t, s: np.prod(norm.pdf(obs[t], model.means[s], np.sqrt(model.variances[s])))  # noqa: E731
    p = model.init_prob[states[0]] * dens(0, states[0])
    for t in range(1, len(states)):
        p *= model.trans[states[t - 1], states[t]] * dens(t, states[t])
    return p


def enumerate_paths(k, n):
    return [np.array(s) for s in itertools.product(range(k), repeat=n)]


class TestForwardBackward:
    def test_single_state(self):
        obs = np.array([[0.5], [1.0], [-2.0]])
        m = GaussianHmm([1.0], [[1.0]], [[0.2]], [[1.5]])
        post = forward_backward(m, obs)
        np.testing.assert_array_equal(post["gamma"], 1.0)
        assert post["log_likelihood"] == pytest.approx(norm.logpdf(obs[:, 0], 0.2, np.sqrt(1.5)).sum(), rel=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        k, n = (2, 4) if seed < 3 else (3, 5)
        model = random_hmm(rng, k, 2)
        obs = rng.normal(0, 2, size=(n, 2))
        paths = enumerate_paths(k, n)
        probs = np.array([joint_prob(model, obs, s) for s in paths])
        total = probs.sum()
        gamma = np.zeros((n, k))
        xi = np.zeros((n - 1, k, k))
        for s, p in zip(paths, probs):
            gamma[np.arange(n), s] += p / total
            xi[np.arange(n - 1), s[:-1], s[1:]] += p / total
        post = forward_backward(model, obs)
        np.testing.assert_allclose(post["gamma"], gamma, atol=1e-10)
        np.testing.assert_allclose(post["xi"], xi, atol=1e-10)
        assert post["log_likelihood"] == pytest.approx(np.log(total), rel=1e-10)

    def test_long_sequence_no_underflow(self):
        model = two_state_hmm(10.0)
        _, obs = model.sample(1000, np.random.default_rng(0))
        post = forward_backward(model, obs)
        assert np.isfinite(post["log_likelihood"])
        np.testing.assert_allclose(post["gamma"].sum(axis=1), 1.0, atol=1e-8)

    def test_nan_rejected(self):
        with pytest.raises(DataError):
            forward_backward(two_state_hmm(), np.array([[0.0], [np.nan]]))

    def test_dimension_mismatch(self):
        with pytest.raises(DataError):
            forward_backward(two_state_hmm(dim=1), np.zeros((5, 2)))

    def test_needs_two_rows(self):
        with pytest.raises(DataError):
            forward_backward(two_state_hmm(), np.zeros((1, 1)))

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 4), n=st.integers(2, 30))
    def test_posterior_consistency(self, seed, k, n):
        rng = np.random.default_rng(seed)
        model = random_hmm(rng, k, 2)
        obs = rng.normal(0, 3, size=(n, 2))
        post = forward_backward(model, obs)
        np.testing.assert_allclose(post["gamma"].sum(axis=1), 1.0, atol=1e-8)
        np.testing.assert_allclose(post["xi"].sum(axis=2), post["gamma"][:-1], atol=1e-8)


class TestViterbi:
    def test_single_state(self):
        m = GaussianHmm([1.0], [[1.0]], [[0.0]], [[1.0]])
        np.testing.assert_array_equal(viterbi(m, np.arange(6.0)).states, 0)

    @pytest.mark.parametrize("k,n", [(2, 8), (3, 6)])
    def test_exhaustive(self, k, n):
        rng = np.random.default_rng(k * 100 + n)
        model = random_hmm(rng, k, 2)
        obs = rng.normal(0, 2, size=(n, 2))
        paths = np.array(enumerate_paths(k, n))
        best = max(path_log_prob(model, obs, s) for s in paths)
        assert path_log_prob(model, obs, paths).max() == best
        path = viterbi(model, obs)
        assert path_log_prob(model, obs, path.states) == best
        assert path.log_likelihood == best

    def test_ties_prefer_lower_state(self):
        m = GaussianHmm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.0], [0.0]], [[1.0], [1.0]])
        np.testing.assert_array_equal(viterbi(m, np.zeros(5)).states, 0)

    def test_separated_model_recovers_states(self):
        model = two_state_hmm(10.0)
        states, obs = model.sample(300, np.random.default_rng(1))
        assert np.mean(viterbi(model, obs).states == states) > 0.99


class TestStationary:
    def test_two_state_hand_solution(self):
        np.testing.assert_allclose(stationary_distribution([[0.9, 0.1], [0.5, 0.5]]), [5 / 6, 1 / 6], atol=1e-12)

    def test_uniform(self):
        np.testing.assert_allclose(stationary_distribution(np.full((4, 4), 0.25)), 0.25, atol=1e-12)

    def test_non_stochastic(self):
        with pytest.raises(DataError):
            stationary_distribution([[0.5, 0.6], [0.5, 0.5]])

    def test_reducible_returns_fixed_point(self):
        pi = stationary_distribution(np.eye(3))
        assert pi.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(pi @ np.eye(3), pi, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**31), k=st.integers(1, 8))
    def test_fixed_point(self, seed, k):
        a = np.random.default_rng(seed).dirichlet(np.ones(k), size=k)
        pi = stationary_distribution(a)
        assert np.max(np.abs(pi @ a - pi)) < 1e-10
        assert pi.min() >= 0 and pi.sum() == pytest.approx(1.0)


class TestFitEm:
    def test_single_state(self):
        obs = np.random.default_rng(0).normal(3.0, 2.0, size=(200, 1))
        res = fit_em(obs, n_states=1)
        np.testing.assert_array_equal(res.model.trans, [[1.0]])
        assert res.model.means[0, 0] == pytest.approx(obs.mean())
        assert res.model.variances[0, 0] == pytest.approx(obs.var())

    def test_recovers_two_state_model(self):
        truth = two_state_hmm(10.0)
        _, obs = truth.sample(500, np.random.default_rng(3))
        res = fit_em(obs, n_states=2, seed=0)
        order = np.argsort(res.model.means[:, 0])
        np.testing.assert_allclose(res.model.means[order, 0], [-5, 5], atol=0.3)
        np.testing.assert_allclose(res.model.trans[np.ix_(order, order)], truth.trans, atol=0.1)

    def test_max_iter_zero(self):
        obs = np.random.default_rng(0).normal(size=(50, 2))
        res = fit_em(obs, n_states=3, max_iter=0)
        assert len(res.loglik_trace) == 0
        np.testing.assert_allclose(res.model.trans, 1 / 3)

    def test_errors(self):
        obs = np.random.default_rng(0).normal(size=(10, 1))
        with pytest.raises(DataError):
            fit_em(obs, n_states=0)
        with pytest.raises(DataError):
            fit_em(obs[:3], n_states=3)
        with pytest.raises(DegenerateError):
            fit_em(np.ones((20, 2)), n_states=2)
        bad = obs.copy()
        bad[4] = np.inf
        with pytest.raises(DataError):
            fit_em(bad, n_states=2)

    def test_parameters_valid(self, regime_table):
        table, _ = regime_table
        m = fit_em(table.values, n_states=4, seed=1, max_iter=60).model
        assert abs(m.init_prob.sum() - 1) < 1e-10
        np.testing.assert_allclose(m.trans.sum(axis=1), 1.0, atol=1e-10)
        assert m.trans.min() >= 0 and m.init_prob.min() >= 0
        assert m.variances.min() >= 1e-4

    def test_variance_floor(self):
        obs = np.concatenate([np.zeros(60), np.random.default_rng(0).normal(5, 1, 60)])[:, None]
        m = fit_em(obs, n_states=2, seed=0).model
        assert m.variances.min() == pytest.approx(1e-4)

    def test_canonical_order(self, regime_table):
        table, _ = regime_table
        m = fit_em(table.values, n_states=4, seed=2, max_iter=80).model
        pi = stationary_distribution(m.trans)
        assert np.all(np.diff(pi) <= 1e-12)

    def test_refit_is_identical(self, regime_table):
        table, _ = regime_table
        a = fit_em(table.values, n_states=3, seed=7, max_iter=40)
        b = fit_em(table.values, n_states=3, seed=7, max_iter=40)
        assert a.model.to_json() == b.model.to_json()
        np.testing.assert_array_equal(a.loglik_trace, b.loglik_trace)

    def test_permuted_initialization_gives_same_model(self):
        rng = np.random.default_rng(0)
        truth = random_hmm(rng, 3, 2)
        truth.means *= 3
        _, obs = truth.sample(400, rng)
        init = random_hmm(np.random.default_rng(9), 3, 2)
        perm = np.array([2, 0, 1])
        permuted = GaussianHmm(init.init_prob[perm], init.trans[np.ix_(perm, perm)], init.means[perm],
                               init.variances[perm])
        a = fit_em(obs, n_states=3, init=init, max_iter=300, tol=1e-10).model
        b = fit_em(obs, n_states=3, init=permuted, max_iter=300, tol=1e-10).model
        np.testing.assert_allclose(a.means, b.means, atol=1e-6)
        np.testing.assert_allclose(a.trans, b.trans, atol=1e-6)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10_000), k=st.integers(1, 4))
    def test_monotone_objective(self, seed, k):
        rng = np.random.default_rng(seed)
        _, obs = random_hmm(rng, 3, 2).sample(120, rng)
        trace = fit_em(obs, n_states=k, seed=seed, max_iter=50).loglik_trace
        assert np.all(np.diff(trace) >= -1e-6)


class TestCanonicalize:
    def test_tie_broken_by_first_mean(self):
        m = GaussianHmm([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[3.0], [-1.0]], [[1.0], [1.0]])
        out, order = canonicalize(m)
        np.testing.assert_array_equal(order, [1, 0])
        np.testing.assert_array_equal(out.means[:, 0], [-1.0, 3.0])


class TestSerialization:
    def test_round_trip_bit_exact(self, tmp_path):
        m = random_hmm(np.random.default_rng(0), 4, 3)
        m.feature_names = ["a", "b", "c"]
        m.seed = 5
        m.save(tmp_path / "m.json")
        back = GaussianHmm.load(tmp_path / "m.json")
        for attr in ("init_prob", "trans", "means", "variances"):
            np.testing.assert_array_equal(getattr(back, attr), getattr(m, attr))
        assert back.feature_names == m.feature_names and back.seed == 5
        assert set(m.to_dict()) == {"K", "pi", "A", "means", "variances", "feature_names", "seed"}

    def test_bad_shapes(self):
        with pytest.raises(DataError):
            GaussianHmm([1.0], [[1.0]], [[0.0], [1.0]], [[1.0]])


class TestBinarize:
    def test_examples(self):
        np.testing.assert_array_equal(binarize_states(np.array([0, 2, 0, 3]), 0, 4), [0, 1, 0, 1])
        np.testing.assert_array_equal(binarize_states(np.zeros(5, dtype=int), 0, 4), 0)

    def test_out_of_range(self):
        with pytest.raises(DataError):
            binarize_states(np.array([0, 1]), 4, 4)


class TestClassificationReport:
    def test_identity(self):
        y = np.array([0, 1, 1, 0, 1])
        r = classification_report(y, y)
        assert r.accuracy == 1.0
        np.testing.assert_array_equal(r.precision, 1.0)
        np.testing.assert_array_equal(r.f1, 1.0)

    def test_all_ones_prediction(self):
        truth = np.array([0] * 90 + [1] * 10)
        r = classification_report(np.ones(100, dtype=int), truth)
        assert r.precision[1] == pytest.approx(0.1)
        assert r.recall[1] == 1.0
        assert r.precision[0] == 0.0 and r.f1[0] == 0.0

    def test_f1_from_reported_row(self):
        assert round(f1_score(0.95, 0.59), 2) == 0.73

    def test_frame_layout(self):
        r = classification_report(np.array([0, 1, 1]), np.array([0, 1, 0]))
        f = r.to_frame()
        assert list(f["label"]) == ["0.0", "1.0", "accuracy", "macro avg", "weighted avg"]
        assert list(f.columns) == ["label", "precision", "recall", "f1-score", "support"]

    def test_errors(self):
        with pytest.raises(DataError):
            classification_report(np.array([0, 1]), np.array([0, 1, 1]))
        with pytest.raises(DataError):
            classification_report(np.array([0, 2]), np.array([0, 1]))

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=80))
    def test_properties(self, pairs):
        pred, truth = np.array(pairs).T
        r = classification_report(pred, truth)
        assert r.support.sum() == len(pairs)
        assert 0 <= r.accuracy <= 1
        for p, rc, f in zip(r.precision, r.recall, r.f1):
            assert f == pytest.approx(2 * p * rc / (p + rc) if p + rc > 0 else 0.0)


def nine_feature_table(n=40, seed=0):
    rng = np.random.default_rng(seed)
    cols = {f"f{i}": rng.normal(size=n) for i in range(9)}
    return SeriesTable(pd.DataFrame(cols, index=pd.date_range("2000-01-01", periods=n, freq="MS", name="date")), "f0")


class TestAugment:
    @pytest.fixture
    def setup(self):
        table = nine_feature_table()
        model = random_hmm(np.random.default_rng(1), 4, 9)
        return table, model, decode_table(model, table)

    @pytest.mark.parametrize("mode,width", [("original", 9), ("states", 10), ("means", 18), ("all", 19)])
    def test_widths(self, setup, mode, width):
        table, model, path = setup
        out = augment_features(table, model, path, mode)
        assert len(out.columns) == width
        assert len(out) == len(table)
        for c in table.columns:
            np.testing.assert_array_equal(out.frame[c].to_numpy(), table.frame[c].to_numpy())

    def test_means_columns_follow_states(self, setup):
        table, model, path = setup
        out = augment_features(table, model, path, "all")
        np.testing.assert_array_equal(out.frame["hidden_state"], path.states)
        np.testing.assert_array_equal(out.frame["mean_f3"], model.means[path.states, 3])

    def test_misaligned_path(self, setup):
        table, model, path = setup
        with pytest.raises(DataError):
            augment_features(table, model, DecodedPath(path.states[:-1], 0.0), "states")

    def test_wrong_dimension(self, setup):
        table, _, path = setup
        with pytest.raises(DataError):
            augment_features(table, random_hmm(np.random.default_rng(0), 4, 3), path, "means")

    def test_path_frame(self, setup):
        _, _, path = setup
        f = path.to_frame(stable_state=0)
        assert list(f.columns) == ["date", "state", "binary_state"]
        assert f["date"].iloc[0] == "2000-01-01"

    def test_markov_summary(self):
        s = markov_summary(two_state_hmm())
        assert list(s.columns) == ["to_0", "to_1", "stationary"]
        np.testing.assert_allclose(s["stationary"], [2 / 3, 1 / 3])
