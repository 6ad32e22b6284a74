"""
Twelve-month forecast with an ensemble band
===========================================

Several networks that differ only in their seed are trained on the full
history. Each forecasts the next 12 months from the last 48-month window;
the median is the point forecast and the 5th to 95th percentiles form the
band.
"""

from hmmlstm import plots
from hmmlstm.forecast import forecast_horizon, path_volatility
from hmmlstm.regime import decode_table, fit_em
from hmmlstm.synthetic import regime_dataset

table, _ = regime_dataset(400, seed=3)
hmm = fit_em(table.values, 4, seed=0, feature_names=table.columns).model
path = decode_table(hmm, table)

result = forecast_horizon(table, "all", horizon=12, n_lags=48, ensemble_size=5, hmm=hmm, path=path,
                          epochs=10, hidden1=16, hidden2=16, dense=8, lr=3e-3)
print(result.to_frame().round(3).to_string(index=False))
print(f"variance of the point path: {path_volatility(result):.4f}")

###############################################################################
# The fan chart is plain SVG text.
svg = plots.fan_chart(table.frame["target"].to_numpy()[-36:], result.point, result.lower, result.upper,
                      "12-month forecast")
with open("forecast.svg", "w") as fh:
    fh.write(svg)
