"""
Monthly alignment and dataset diagnostics
=========================================

Raw sources arrive at different frequencies. Here a quarterly level series is
interpolated to months, a daily series is averaged per month, both become
year-over-year growth rates and are aligned with a monthly series. The
aligned table is then summarized and tested for unit roots.
"""

import numpy as np
import pandas as pd

from hmmlstm.ingest import RawSeries, adf_table, align, correlation_matrix, pct_change_year, summary_stats, to_monthly

rng = np.random.default_rng(0)

###############################################################################
# Three raw inputs: quarterly GDP-like levels, business-daily prices and a
# monthly rate.
quarters = pd.date_range("1999-01-01", "2009-10-01", freq="QS")
gdp = RawSeries("gdp", "quarterly", quarters.values.astype("datetime64[D]"),
                100 * np.exp(np.cumsum(0.006 + 0.01 * rng.standard_normal(len(quarters)))))

days = pd.bdate_range("1999-01-01", "2009-12-31")
prices = RawSeries("prices", "daily", days.values.astype("datetime64[D]"),
                   50 * np.exp(np.cumsum(0.0003 + 0.01 * rng.standard_normal(len(days)))))

months = pd.date_range("2000-01-01", "2009-12-01", freq="MS")
rate = RawSeries("rate", "monthly", months.values.astype("datetime64[D]"),
                 5 + np.cumsum(0.1 * rng.standard_normal(len(months))))

###############################################################################
# Frequency conversion, then growth rates (the price series as a fraction).
gdp_growth = pct_change_year(to_monthly(gdp, "interpolate_linear", end="2009-12-01"))
price_growth = pct_change_year(to_monthly(prices, "aggregate_mean"), scale="fraction")

table = align({"gdp_growth": gdp_growth, "price_growth": price_growth, "rate": rate},
              start="2000-01-01", end="2009-12-01", target="gdp_growth")
print(f"{len(table)} aligned months, columns {table.columns}")

###############################################################################
# Descriptive statistics, correlations and ADF tests.
print(summary_stats(table).round(3))
print(correlation_matrix(table).round(3))
print(adf_table(table))
