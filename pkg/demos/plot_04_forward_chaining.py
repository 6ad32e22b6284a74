"""
Forward-chaining cross-validation
=================================

Time series folds must keep every test block after its training window.
The samples are cut into six contiguous blocks and each fold trains on an
expanding prefix.
"""

from hmmlstm.forecast import compare_configs
from hmmlstm.pipeline import forward_chain_folds
from hmmlstm.regime import decode_table, fit_em
from hmmlstm.synthetic import regime_dataset

plan = forward_chain_folds(623, n_folds=5)
for i, ((tr0, tr1), (te0, te1)) in enumerate(plan, 1):
    print(f"fold {i}: train [{tr0}, {tr1})  test [{te0}, {te1})")

###############################################################################
# Scores per mode and fold. The scaler is refitted on each training window.
table, _ = regime_dataset(400, seed=1)
hmm = fit_em(table.values, 4, seed=0, feature_names=table.columns).model
path = decode_table(hmm, table)
cv = compare_configs(table, ("original", "means"), hmm, path, n_folds=5,
                     n_lags=12, epochs=10, hidden1=12, hidden2=12, dense=6, lr=3e-3)
print(cv.frame.round(3))
