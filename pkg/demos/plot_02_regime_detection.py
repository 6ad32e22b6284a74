"""
Detecting regimes with a Gaussian HMM
=====================================

A four-state diagonal Gaussian HMM is fitted by Baum-Welch to a synthetic
regime-switching table. The decoded Viterbi path is compared with the true
regimes, the "calm" state is binarized against the rest, and the fitted
chain's long-run behavior is summarized.
"""

import numpy as np

from hmmlstm.regime import (
    augment_features,
    binarize_states,
    classification_report,
    decode_table,
    fit_em,
    markov_summary,
)
from hmmlstm.synthetic import regime_dataset

table, true_states = regime_dataset(650, seed=0)

###############################################################################
# Fit on the unscaled features. States come back ordered by stationary
# probability, so state 0 is the most common regime.
fit = fit_em(table.values, n_states=4, seed=0, feature_names=table.columns)
print(f"EM stopped after {fit.n_iter} iterations (converged={fit.converged})")
print(markov_summary(fit.model).round(3))

###############################################################################
# Decode and score "non-calm" against the truth.
path = decode_table(fit.model, table)
calm_truth = np.bincount(true_states).argmax()
pred = binarize_states(path, stable_state=0, n_states=4)
truth = (true_states != calm_truth).astype(int)
print(classification_report(pred, truth).to_frame().round(3))

###############################################################################
# The decoded states and state means become extra model inputs.
for mode in ("states", "means", "all"):
    print(mode, len(augment_features(table, fit.model, path, mode).columns), "columns")
