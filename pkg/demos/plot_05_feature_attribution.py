"""
Which inputs drive the prediction?
==================================

Integrated Gradients attributes each prediction to every (lag, feature)
input. Averaging over test samples and lags gives one signed importance per
feature.
"""

import numpy as np

from hmmlstm.attribution import attribute_samples, integrated_gradients
from hmmlstm.network import run_experiment
from hmmlstm.regime import decode_table, fit_em
from hmmlstm.synthetic import regime_dataset

table, _ = regime_dataset(400, seed=2)
hmm = fit_em(table.values, 4, seed=0, feature_names=table.columns).model
path = decode_table(hmm, table)
result = run_experiment(table, "means", hmm, path, n_lags=12, epochs=15, hidden1=16, hidden2=16, dense=8, lr=3e-3)
net, test = result.network, result.split.test

###############################################################################
# Completeness: attributions add up to F(x) - F(baseline) as m grows.
x = test.X[0]
gap = float(net.forward(x[None])[0, 0] - net.forward(np.zeros_like(x)[None])[0, 0])
for m in (5, 50, 500):
    print(f"m={m:>4}: sum IG = {integrated_gradients(net, x, m=m).sum():+.5f}   F(x)-F(0) = {gap:+.5f}")

###############################################################################
# Average importance over the test set.
amap = attribute_samples(net, test.X, m=50, feature_names=table.columns + [f"mean_{c}" for c in table.columns],
                         sample_dates=test.sample_dates)
print(amap.mean_by_feature().sort_values().round(5))
