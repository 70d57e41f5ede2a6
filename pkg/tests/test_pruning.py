import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from snnvad.errors import ValidationError
from snnvad.network import build_network
from snnvad.pruning import (DEFAULT_SCHEDULE, PruneMask, TicketSchedule, apply_mask, lottery_loop,
                            magnitude_prune)


def test_prune_example():
    m = magnitude_prune(np.array([3.0, -1.0, 0.5, -2.0]), None, 0.5)
    np.testing.assert_array_equal(m.mask, [1, 0, 0, 1])


def test_prune_tie_rule():
    m = magnitude_prune(np.ones(4), None, 0.5)
    np.testing.assert_array_equal(m.mask, [1, 1, 0, 0])


def test_prune_requires_lower_density():
    full = PruneMask.full((4,))
    with pytest.raises(ValidationError):
        magnitude_prune(np.ones(4), full, 1.0)
    half = magnitude_prune(np.arange(4.0), full, 0.5)
    with pytest.raises(ValidationError):
        magnitude_prune(np.arange(4.0), half, 0.5)


@given(arrays(np.float64, (8, 5), elements=st.floats(-10, 10)), st.floats(0.05, 0.95))
def test_prune_counts_and_nesting(w, frac):
    m1 = magnitude_prune(w, None, frac)
    assert m1.count == int(np.floor(frac * 40 + 0.5))
    if frac * 0.5 * 40 >= 0.5:
        m2 = magnitude_prune(w, m1, frac * 0.5)
        assert m2.is_subset_of(m1)
    # every kept weight is at least as large as every dropped one
    kept, dropped = np.abs(w[m1.mask == 1]), np.abs(w[m1.mask == 0])
    if kept.size and dropped.size:
        assert kept.min() >= dropped.max()


def test_default_schedule_exact_counts(rng):
    w = rng.normal(size=(128, 200))
    mask = None
    for frac in DEFAULT_SCHEDULE:
        mask = magnitude_prune(w, mask, frac)
        assert mask.count == round(frac * 25_600)
    assert mask.count == 3840


def test_schedule_validation():
    with pytest.raises(ValidationError):
        TicketSchedule((0.5, 0.5))
    with pytest.raises(ValidationError):
        TicketSchedule((0.4, 0.7))
    with pytest.raises(ValidationError):
        TicketSchedule((1.2,))
    assert len(TicketSchedule(())) == 0


def test_apply_mask(rng):
    w = rng.normal(size=(3, 4))
    np.testing.assert_array_equal(apply_mask(w, PruneMask.full(w.shape)), w)
    assert not apply_mask(w, np.zeros((3, 4))).any()
    m = magnitude_prune(w, None, 0.5)
    once = apply_mask(w, m)
    np.testing.assert_array_equal(apply_mask(once, m), once)


def _fake_train(model):
    # deterministic stand-in for training: nudge the weights
    m = model.copy()
    for layer in m.layers:
        layer.weights = layer.weights * 1.5 + 0.01
        if layer.mask is not None:
            layer.weights = layer.weights * layer.mask
    return m, {"density": None}


def test_lottery_loop_rewinds_and_nests():
    init = build_network([6, 5, 2], 10.0, seed=3)
    calls = []

    def train_fn(m):
        calls.append(m)
        return _fake_train(m)

    rounds = lottery_loop(init, (0.6, 0.3), train_fn)
    assert len(rounds) == len(calls) == 3
    w0 = init.layers[0].weights
    for rnd, start in zip(rounds, calls):
        # every run starts from the original init times the current mask
        np.testing.assert_array_equal(start.layers[0].weights, np.where(rnd.mask.mask == 1, w0, 0.0))
        np.testing.assert_array_equal(start.layers[1].weights, init.layers[1].weights)
    assert rounds[2].mask.is_subset_of(rounds[1].mask)
    assert rounds[2].mask.count == 9


def test_lottery_empty_schedule():
    init = build_network([6, 5, 2], 10.0, seed=3)
    rounds = lottery_loop(init, (), _fake_train)
    assert len(rounds) == 1
    assert rounds[0].mask.density == 1.0


def test_lottery_reuses_dense_run():
    init = build_network([6, 5, 2], 10.0, seed=3)
    calls = []
    dense = _fake_train(init)
    lottery_loop(init, (0.5,), lambda m: calls.append(m) or _fake_train(m), dense=dense)
    assert len(calls) == 1
