import numpy as np
import pandas as pd
import pytest

from hmmlstm.network import LstmNetwork, NetworkConfig
from hmmlstm.synthetic import regime_dataset


def write_series_csv(path, dates, values, header=True):
    """Write a FRED-style DATE,VALUE file; NaN values become '.'."""
    lines = ["DATE,VALUE"] if header else []
    for d, v in zip(dates, values):
        lines.append(f"{pd.Timestamp(d).date()},{'.' if np.isnan(v) else repr(float(v))}")
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def small_net():
    """Seeded (L=5, D=3, H=4, horizon=2) network with non-trivial biases."""
    net = LstmNetwork.init(NetworkConfig(n_features=3, n_lags=5, horizon=2, hidden1=4, hidden2=4, dense=3), seed=3)
    rng = np.random.default_rng(11)
    for k in ("b1", "b2", "bd", "bh"):
        net.params[k] = net.params[k] + 0.3 * rng.standard_normal(net.params[k].shape)
    return net


@pytest.fixture(scope="session")
def regime_table():
    table, states = regime_dataset(300, seed=5)
    return table, states


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
