"""Compare the compiled and pure-numpy LIF kernels.

Usage: python benchmarks/bench_kernels.py [--batch 64] [--repeat 5]

Times forward and forward+backward passes of the h1 (128-200-2) and h2
(128-100-15-2) networks on random TTFS rasters, and checks that both
backends agree on the results.
"""
import argparse
import time

import numpy as np

from snnvad import _kernels_py, kernels
from snnvad.encoding import encode_context, encode_frames
from snnvad.network import make_architecture

try:
    from snnvad import _kernels
except ImportError:
    _kernels = None


def run(model, x, impl, backward):
    out = []
    layer_in = x
    for layer in model.layers:
        mode = kernels.READOUT if layer.is_readout else kernels.HARD
        V, _, S = kernels.layer_forward(layer_in, layer.weights, layer.alpha, layer.beta, 1.0,
                                        model.surrogate_lambda, mode, record_current=False, impl=impl)
        out.append((layer_in, V))
        layer_in = S
    if backward:
        g = np.ones_like(out[-1][1]) * 1e-3
        for li in range(len(model.layers) - 1, -1, -1):
            layer = model.layers[li]
            mode = kernels.READOUT if layer.is_readout else kernels.HARD
            _, g = kernels.layer_backward(out[li][0], layer.weights, out[li][1], g, layer.alpha,
                                          layer.beta, 1.0, model.surrogate_lambda, mode,
                                          need_gx=li > 0, impl=impl)
    return out[-1][1]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    frames = rng.uniform(size=(args.batch, 128))
    cases = [("h1", encode_frames(frames)), ("h2", encode_context(frames))]
    print(f"batch {args.batch}, best of {args.repeat}")
    print(f"{'net':<4} {'pass':<17} {'python ms':>10} {'cython ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for name, x in cases:
        model = make_architecture(name, seed=0)
        for backward in (False, True):
            tp, vp = best_of(lambda: run(model, x, _kernels_py, backward), args.repeat)
            tc, vc = best_of(lambda: run(model, x, _kernels, backward), args.repeat)
            label = "forward+backward" if backward else "forward"
            diff = float(np.max(np.abs(vp - vc)))
            print(f"{name:<4} {label:<17} {tp * 1e3:10.2f} {tc * 1e3:10.2f} {tp / tc:8.1f} {diff:11.1e}")


if __name__ == "__main__":
    main()
