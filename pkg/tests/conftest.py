import numpy as np
import pytest

from snnvad.network import build_network


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def small_net(sizes=(3, 4, 2), T=20, seed=0, tau_mem=10.0, scale=1.0, window=None):
    model = build_network(sizes, tau_mem, 5.0, T, window, seed=seed)
    for layer in model.layers:
        layer.weights *= scale
    return model


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
