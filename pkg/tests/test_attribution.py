import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from hmmlstm.attribution import (
    AttributionMap,
    attribute_samples,
    average_attributions,
    input_gradient,
    integrated_gradients,
)
from hmmlstm.errors import DataError
from hmmlstm.network import LstmNetwork, NetworkConfig, train
from hmmlstm.pipeline import make_supervised, scaler_fit


class LinearModel:
    """F(x) = sum(w * x) + b for [L x D] windows, with its exact gradient."""

    def __init__(self, w, b=0.0):
        self.w = np.asarray(w, dtype=float)
        self.b = b

    def forward(self, X):
        return (np.asarray(X) * self.w).sum(axis=(1, 2))[:, None] + self.b

    def input_gradient(self, X, output_index=0):
        return np.broadcast_to(self.w, np.shape(X)).copy()


class ScaledModel:
    def __init__(self, inner, a):
        self.inner, self.a = inner, a

    def input_gradient(self, X, output_index=0):
        return self.a * self.inner.input_gradient(X, output_index)


@pytest.fixture(scope="module")
def trained_net():
    rng = np.random.default_rng(0)
    data = rng.uniform(size=(60, 3))
    data[:, 0] = np.convolve(data[:, 1], [0.5, 0.5], mode="same") - 0.3 * data[:, 2]
    data = scaler_fit(data).transform(data)
    tensor = make_supervised(data, 5, 1)
    net, _ = train(NetworkConfig(3, 5, 1, 6, 6, 4), tensor, epochs=30, batch_size=16, lr=1e-2, seed=1)
    return net, tensor


class TestInputGradient:
    def test_single_window(self, small_net):
        x = np.random.default_rng(0).normal(size=(5, 3))
        g = input_gradient(small_net, x, 1)
        assert g.shape == (5, 3)
        np.testing.assert_array_equal(g, small_net.input_gradient(x[None], 1)[0])

    def test_zero_network(self):
        net = LstmNetwork.zeros(NetworkConfig(3, 4, 1, 3, 3, 2))
        np.testing.assert_array_equal(input_gradient(net, np.ones((4, 3))), 0.0)

    def test_duplicated_rows(self, small_net):
        x = np.random.default_rng(1).normal(size=(1, 5, 3))
        g = input_gradient(small_net, np.concatenate([x, x]))
        np.testing.assert_array_equal(g[0], g[1])

    def test_bad_output_index(self, small_net):
        with pytest.raises(DataError):
            input_gradient(small_net, np.zeros((5, 3)), 2)


class TestIntegratedGradients:
    def test_zero_path(self, small_net):
        x = np.random.default_rng(2).normal(size=(5, 3))
        np.testing.assert_array_equal(integrated_gradients(small_net, x, x.copy(), m=10), 0.0)

    def test_linear_exact_m1(self):
        rng = np.random.default_rng(3)
        w, x = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        np.testing.assert_array_equal(integrated_gradients(LinearModel(w), x, m=1), w * x)

    @pytest.mark.parametrize("m", [2, 7, 50])
    def test_linear_any_m(self, m):
        rng = np.random.default_rng(m)
        w, x = rng.normal(size=(4, 2)), rng.normal(size=(4, 2))
        np.testing.assert_allclose(integrated_gradients(LinearModel(w), x, m=m), w * x, rtol=1e-13)

    def test_completeness_high_m(self, trained_net):
        net, tensor = trained_net
        for x in tensor.X[[3, 20, 40]]:
            base = np.zeros_like(x)
            ig = integrated_gradients(net, x, base, m=2048)
            gap = float(net.forward(x[None])[0, 0] - net.forward(base[None])[0, 0])
            assert abs(ig.sum() - gap) < 0.01 * abs(gap)

    def test_completeness_error_shrinks_with_m(self, trained_net):
        net, tensor = trained_net
        errs = []
        for m in (4, 16, 64, 256, 2048):
            e = []
            for x in tensor.X[::7]:
                base = np.zeros_like(x)
                gap = float(net.forward(x[None])[0, 0] - net.forward(base[None])[0, 0])
                e.append(abs(integrated_gradients(net, x, base, m=m).sum() - gap))
            errs.append(np.mean(e))
        assert all(b <= a for a, b in zip(errs, errs[1:]))

    def test_chunking_does_not_change_result(self, trained_net):
        net, tensor = trained_net
        x = tensor.X[10]
        a = integrated_gradients(net, x, m=64, chunk=512)
        b = integrated_gradients(net, x, m=64, chunk=64)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_deterministic(self, trained_net):
        net, tensor = trained_net
        x = tensor.X[5]
        assert integrated_gradients(net, x, m=33).tobytes() == integrated_gradients(net, x, m=33).tobytes()

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-5, 5), seed=st.integers(0, 1000), m=st.integers(1, 40))
    def test_linearity_in_model(self, a, seed, m):
        net = LstmNetwork.init(NetworkConfig(3, 5, 1, 4, 4, 3), seed=2)
        x = np.random.default_rng(seed).normal(size=(5, 3))
        base = integrated_gradients(net, x, m=m)
        scaled = integrated_gradients(ScaledModel(net, a), x, m=m)
        np.testing.assert_allclose(scaled, a * base, rtol=1e-12, atol=1e-14)

    def test_errors(self, small_net):
        with pytest.raises(DataError):
            integrated_gradients(small_net, np.zeros((5, 3)), np.zeros((4, 3)))
        with pytest.raises(DataError):
            integrated_gradients(small_net, np.zeros((5, 3)), m=0)


class TestAverage:
    def test_single_sample_single_lag(self):
        v = np.array([[[1.5, -2.0]]])
        np.testing.assert_array_equal(average_attributions(v), [1.5, -2.0])

    def test_opposites_cancel(self):
        v = np.array([[[1.0, -3.0]], [[-1.0, 3.0]]])
        np.testing.assert_array_equal(average_attributions(v), [0.0, 0.0])
        np.testing.assert_array_equal(average_attributions(v, magnitude=True), [1.0, 3.0])

    def test_empty(self):
        with pytest.raises(DataError):
            average_attributions(np.empty((0, 3, 2)))


class TestAttributeSamples:
    def test_map_and_frames(self, trained_net):
        net, tensor = trained_net
        amap = attribute_samples(net, tensor.X[:4], m=8, feature_names=["y", "a", "b"],
                                 sample_dates=pd.date_range("2000-01-01", periods=4, freq="MS"))
        assert amap.values.shape == (4, 5, 3)
        f = amap.long_frame()
        assert list(f.columns) == ["sample_date", "lag", "feature", "value"]
        assert len(f) == 4 * 5 * 3
        first = f.iloc[:3]
        assert list(first["lag"]) == [5, 5, 5] and list(first["feature"]) == ["y", "a", "b"]
        assert f.iloc[-1]["lag"] == 1
        assert list(amap.mean_by_feature().index) == ["y", "a", "b"]

    def test_train_mean_baseline(self, trained_net):
        net, tensor = trained_net
        amap = attribute_samples(net, tensor.X[:2], baseline="train_mean", m=4, train_X=tensor.X)
        assert amap.baseline_kind == "train_mean"
        with pytest.raises(DataError):
            attribute_samples(net, tensor.X[:2], baseline="train_mean")
        with pytest.raises(DataError):
            attribute_samples(net, tensor.X[:2], baseline="median")

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            AttributionMap(np.full((1, 2, 1), np.nan), "zeros", 1, ["a"])

    def test_inverse_relationship_has_negative_sign(self):
        # target falls when the covariate rises, as with unemployment and inflation
        rng = np.random.default_rng(4)
        u = np.cumsum(rng.normal(0, 0.3, 300))
        target = -0.8 * u + rng.normal(0, 0.1, 300)
        data = scaler_fit(np.column_stack([target, u])).transform(np.column_stack([target, u]))
        tensor = make_supervised(data, 6, 1)
        net, _ = train(NetworkConfig(2, 6, 1, 8, 8, 4), tensor, epochs=40, batch_size=32, lr=1e-2, seed=0)
        amap = attribute_samples(net, tensor.X[200:], m=16, feature_names=["target", "u"])
        assert amap.mean_by_feature()["u"] < 0
