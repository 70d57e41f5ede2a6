"""Acceptance criteria, one test per criterion.

Each test records a single ``PASS``/``FAIL`` line; the lines are printed in
the pytest terminal summary (and directly when this file is run as a script).
"""
import time

import numpy as np
import pytest

from snnvad import checkpoint as ck
from snnvad.audio import fit_normalizer, normalize
from snnvad.encoding import encode_context, encode_frame, encode_frames, spike_times
from snnvad.energy import estimate_power, get_preset, spike_stats
from snnvad.metrics import dcf, hter, median_smooth, roc_sweep
from snnvad.network import build_network, forward, make_architecture, surrogate_grad
from snnvad.pruning import DEFAULT_SCHEDULE, apply_mask, lottery_loop
from snnvad.synth import make_toy_task
from snnvad.training import accuracy, gradient_check, train

RESULTS = []


def report(label, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    assert ok, line


def toy_net(seed=0):
    return build_network([128, 32, 2], 10.0, 5.0, 100, seed=seed)


# 1 -------------------------------------------------------------------------------


def test_c01_gradient_correctness():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for k in range(20):
        depth = int(rng.integers(1, 3))
        sizes = [int(rng.integers(1, 5)) for _ in range(depth + 1)] + [2]
        T = int(rng.integers(5, 21))
        n_layers = len(sizes) - 1
        m = build_network(sizes, rng.uniform(2.0, 30.0, n_layers), rng.uniform(2.0, 10.0, n_layers), T,
                          seed=int(rng.integers(1 << 31)))
        for layer in m.layers:
            layer.weights *= rng.uniform(0.5, 3.0)
        r = gradient_check(m, rng.uniform(size=(T, sizes[0])), int(rng.integers(0, 2)))
        worst = max(worst, r.max_rel_error)
    elapsed = time.perf_counter() - t0
    report("C1 gradient correctness", worst < 1e-4 and elapsed < 60,
           f"max rel error {worst:.2e} over 20 nets (< 1e-4), {elapsed:.1f} s")


# 2 -------------------------------------------------------------------------------


def test_c02_parameter_counts():
    h1, h2 = make_architecture("h1").n_weights, make_architecture("h2").n_weights
    report("C2 parameter counts", h1 == 26_000 and h2 == 14_330, f"h1 {h1}, h2 {h2}")


# 3 -------------------------------------------------------------------------------


def test_c03_surrogate_values():
    vals = [float(surrogate_grad(v, 1.0, 10.0)) for v in (1.0, 1.1, 0.9)]
    ok = vals[0] == 1.0 and all(abs(v - 0.25) < 1e-15 for v in vals[1:])
    report("C3 surrogate values", ok, f"at theta {vals[0]}, theta+0.1 {vals[1]!r}, theta-0.1 {vals[2]!r}")


# 4 -------------------------------------------------------------------------------


def test_c04_encoder_contract():
    rng = np.random.default_rng(4)
    frames = rng.uniform(size=(1000, 128))
    counts = encode_frames(frames).sum(axis=(1, 2))
    per_column = encode_frames(frames).sum(axis=1)
    ok_count = bool((counts == 128).all() and (per_column == 1).all())
    shift_ok = True
    for shift in range(1, 100):
        c = shift / 100
        x = rng.uniform(c + 1e-9, 1.0, size=(50, 128))
        tb, td = spike_times(x), spike_times(x - c)
        free = tb + shift <= 99
        shift_ok &= bool(np.array_equal(td[free], tb[free] + shift))
        # the raster is the same pattern delayed by ``shift`` rows
        base, delayed = encode_frame(x[0]), encode_frame(x[0] - c)
        shift_ok &= bool(np.array_equal(delayed[shift:, free[0]], base[:100 - shift, free[0]]))
    ends = spike_times(np.array([1.0, 0.0])).tolist()
    report("C4 encoder contract", ok_count and shift_ok and ends == [0, 99],
           f"1000 frames x 128 spikes {ok_count}, shifts 1..99 {shift_ok}, x=1->t={ends[0]}, x=0->t={ends[1]}")


# 5 -------------------------------------------------------------------------------


def test_c05_toy_task_learning():
    x, y = make_toy_task(64, seed=0)
    t0 = time.perf_counter()
    trained, hist = train(toy_net(0), x, y, epochs=2000, batch_size=64, max_steps=2000,
                          target_accuracy=1.0, seed=0)
    acc = accuracy(trained, x, y)
    report("C5 toy-task learning", acc >= 0.98 and hist.steps <= 2000,
           f"accuracy {acc:.4f} after {hist.steps} Adam steps ({time.perf_counter() - t0:.1f} s)")


# 6 -------------------------------------------------------------------------------


@pytest.mark.slow
def test_c06_lottery_ticket():
    x, y = make_toy_task(64, seed=0)
    init = toy_net(0)
    starts = []

    def train_fn(m):
        starts.append(m)
        trained, _ = train(m, x, y, epochs=2000, batch_size=64, max_steps=2000, seed=0)
        return trained, {"accuracy": accuracy(trained, x, y)}

    t0 = time.perf_counter()
    rounds = lottery_loop(init, DEFAULT_SCHEDULE, train_fn)
    elapsed = time.perf_counter() - t0
    size = init.layers[0].weights.size
    final = rounds[-1].mask
    exact = final.count == int(np.floor(0.15 * size + 0.5))
    nested = all(b.mask.is_subset_of(a.mask) for a, b in zip(rounds, rounds[1:]))
    rewind = all(
        s.layers[0].weights.tobytes() == apply_mask(init.layers[0].weights, r.mask).tobytes()
        and all(a.weights.tobytes() == b.weights.tobytes() for a, b in zip(s.layers[1:], init.layers[1:]))
        for s, r in zip(starts, rounds)
    )
    dense_acc, final_acc = rounds[0].metrics["accuracy"], rounds[-1].metrics["accuracy"]
    close = abs(dense_acc - final_acc) <= 0.02
    report("C6 lottery-ticket pruning",
           exact and nested and rewind and close and len(starts) == 5 and elapsed < 3600,
           f"final density {final.density:.5f} ({final.count}/{size}), nested {nested}, rewind {rewind}, "
           f"accuracy dense {dense_acc:.4f} vs pruned {final_acc:.4f}, {len(starts)} runs in {elapsed:.0f} s")


# 7 -------------------------------------------------------------------------------


def test_c07_metric_identities():
    rng = np.random.default_rng(7)
    far, mr = rng.uniform(size=(2, 10_000))
    err = max(np.max(np.abs(dcf(far, mr) - (0.25 * far + 0.75 * mr))),
              np.max(np.abs(hter(far, mr) - 0.5 * (far + mr))))
    truth = rng.integers(0, 2, size=2000)
    scores = truth + rng.normal(size=2000)
    pts = roc_sweep(scores, truth, np.linspace(-4, 5, 61))
    fars, hits = np.array([p[0] for p in pts]), np.array([p[1] for p in pts])
    mono = bool((np.diff(fars) <= 0).all() and (np.diff(hits) <= 0).all())
    report("C7 metric identities", err <= 1e-12 and mono,
           f"max identity error {err:.1e} over 10000 pairs, ROC monotone in rho {mono}")


# 8 -------------------------------------------------------------------------------


def test_c08_power_arithmetic():
    dense = estimate_power(None, get_preset("truenorth-dense"), 330) * 1e6
    sparse = estimate_power(None, get_preset("truenorth-sparse"), 330) * 1e6
    ok = abs(dense - 33.0) <= 0.15 and abs(sparse - 25.1) <= 0.15
    report("C8 power arithmetic", ok, f"{dense:.3f} uW (ref 33.0), {sparse:.3f} uW (ref 25.1), tol 0.15")


# 9 -------------------------------------------------------------------------------


def _majority_oracle(x, size=11):
    half, n = size // 2, len(x)
    return np.array([int(sum(x[min(max(j, 0), n - 1)] for j in range(i - half, i + half + 1)) > half)
                     for i in range(n)])


def test_c09_median_filter():
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 201))
        x = (rng.uniform(size=n) < rng.uniform()).astype(int)
        bad += not np.array_equal(median_smooth(x, 11), _majority_oracle(x))
    report("C9 median filter", bad == 0, f"{1000 - bad}/1000 random sequences match the majority oracle")


# 10 ------------------------------------------------------------------------------


def test_c10_input_rate():
    rng = np.random.default_rng(10)
    feats = rng.normal(-5.0, 4.0, size=(64, 128))
    norm = fit_normalizer(feats)
    x = normalize(feats, norm)
    h1 = make_architecture("h1", seed=1)
    r1 = spike_stats(forward(h1, encode_frames(x)), h1).rates[0]
    h2 = make_architecture("h2", seed=1)
    r2 = spike_stats(forward(h2, encode_context(x[:16])), h2).rates[0] / 5
    report("C10 input spike rate", r1 == 1.0 and r2 == 1.0, f"h1 {r1!r} per frame, h2 {r2!r} per frame")


# 11 ------------------------------------------------------------------------------


def test_c11_determinism():
    x, y = make_toy_task(32, seed=11)
    blobs = []
    for _ in range(2):
        model = make_architecture("h1", seed=11)
        init = [w.copy() for w in model.weights()]
        trained, _ = train(model, x, y, epochs=3, batch_size=8, seed=11)
        blobs.append(ck.dumps(ck.Checkpoint(trained, init, None, 11, {"epochs": 3})))
    same = blobs[0] == blobs[1]
    roundtrip = ck.dumps(ck.loads(blobs[0])) == blobs[0]
    report("C11 determinism", same and roundtrip,
           f"repeat runs byte-identical {same}, checkpoint round trip byte-identical {roundtrip}")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
