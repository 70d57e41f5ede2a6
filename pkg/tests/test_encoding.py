import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from snnvad.encoding import (context_windows, encode_context, encode_frame, encode_frames,
                             encode_sequence, read_raster, spike_times, write_raster)
from snnvad.errors import DataError, ValidationError

unit = st.floats(0.0, 1.0, allow_nan=False)


@pytest.mark.parametrize("x,t", [(1.0, 0), (0.5, 50), (0.0, 99), (0.996, 0), (0.994, 1)])
def test_spike_time_examples(x, t):
    assert spike_times(np.array([x]))[0] == t


def test_out_of_range_rejected():
    with pytest.raises(DataError):
        spike_times(np.array([1.01]))
    with pytest.raises(DataError):
        spike_times(np.array([-0.01]))
    with pytest.raises(DataError):
        spike_times(np.array([np.nan]))


@given(arrays(np.float64, 128, elements=unit))
def test_one_spike_per_coefficient(x):
    r = encode_frame(x)
    assert r.shape == (100, 128)
    assert r.dtype == np.uint8
    assert r.sum() == 128
    np.testing.assert_array_equal(r.sum(axis=0), 1)


@given(arrays(np.float64, 16, elements=unit))
def test_monotone(x):
    t = spike_times(x)
    for j in range(16):
        for k in range(16):
            if x[j] > x[k]:
                assert t[j] <= t[k]


@settings(max_examples=200)
@given(st.integers(1, 99), st.data())
def test_shift_property(shift, data):
    c = shift / 100
    # x - c must lie in (0, 1]
    x = data.draw(arrays(np.float64, 32, elements=st.floats(c + 1e-6, 1.0)))
    delayed = encode_frame(x - c)
    base = encode_frame(x)
    tb, td = spike_times(x), spike_times(x - c)
    unclamped = tb + shift <= 99
    np.testing.assert_array_equal(td[unclamped], tb[unclamped] + shift)
    np.testing.assert_array_equal(delayed[shift:, unclamped], base[:100 - shift, unclamped])


def test_sequence_640_spikes_and_period(rng):
    frame = rng.uniform(size=128)
    seq = encode_sequence(np.tile(frame, (5, 1)))
    assert seq.shape == (500, 128)
    assert seq.sum() == 640
    for k in range(1, 5):
        np.testing.assert_array_equal(seq[100 * k:100 * (k + 1)], seq[:100])


def test_sequence_arity():
    with pytest.raises(ValidationError):
        encode_sequence(np.zeros((4, 128)))


def test_encode_frames_matches_single(rng):
    frames = rng.uniform(size=(6, 128))
    batch = encode_frames(frames)
    for i in range(6):
        np.testing.assert_array_equal(batch[i], encode_frame(frames[i]))


def test_context_pads_with_first_frame(rng):
    frames = rng.uniform(size=(7, 128))
    idx = context_windows(frames)
    np.testing.assert_array_equal(idx[0], [0, 0, 0, 0, 0])
    np.testing.assert_array_equal(idx[2], [0, 0, 0, 1, 2])
    np.testing.assert_array_equal(idx[6], [2, 3, 4, 5, 6])
    ctx = encode_context(frames)
    assert ctx.shape == (7, 500, 128)
    np.testing.assert_array_equal(ctx[6], encode_sequence(frames[2:7]))
    assert (ctx.sum(axis=(1, 2)) == 640).all()


def test_raster_roundtrip(tmp_path, rng):
    r = encode_frame(rng.uniform(size=13))
    write_raster(tmp_path / "r.svsr", r)
    back = read_raster(tmp_path / "r.svsr")
    np.testing.assert_array_equal(back, r)
