"""Discrete-time LIF networks: parameters, forward simulation, and surrogate-gradient BPTT.

Every layer follows, per time step ``t`` (threshold 1, membrane resistance 1)::

    S(t)   = H(V(t) - theta)              # hidden layers only
    V(t+1) = alpha * V(t) + I(t) - S(t)
    I(t+1) = beta * I(t) + W^T x(t)

where ``x(t)`` are the spikes of the layer below at the same step. The final
layer is a two-neuron readout (no-speech, speech) that integrates but never
spikes or resets. In the backward pass dS/dV is the fast-sigmoid derivative
``1 / (1 + lam |V - theta|)^2`` and the reset term is treated as a constant.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ValidationError

N_INPUT = 128
N_CLASSES = 2
THETA = 1.0
SURROGATE_LAMBDA = 10.0
DELTA_T = 1.0


@dataclass
class LifLayerParams:
    weights: np.ndarray
    tau_mem: float
    tau_syn: float
    is_readout: bool = False
    theta: float = THETA
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValidationError("layer weights must be a 2-D (n_pre, n_post) matrix")
        if self.tau_mem <= 0 or self.tau_syn <= 0:
            raise ValidationError("time constants must be positive")
        if self.theta != THETA:
            raise ValidationError("the firing threshold is fixed at 1.0")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=np.uint8)
            if self.mask.shape != self.weights.shape:
                raise ValidationError("mask shape does not match weights")

    @property
    def alpha(self):
        return float(np.exp(-DELTA_T / self.tau_mem))

    @property
    def beta(self):
        return float(np.exp(-DELTA_T / self.tau_syn))

    @property
    def n_pre(self):
        return self.weights.shape[0]

    @property
    def n_post(self):
        return self.weights.shape[1]

    def effective_weights(self):
        if self.mask is None:
            return self.weights
        return self.weights * self.mask


@dataclass
class NetworkModel:
    layers: list
    T_total: int
    readout_window: int | None = None
    surrogate_lambda: float = SURROGATE_LAMBDA
    delta_t: float = DELTA_T
    name: str = "custom"

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("a network needs at least the readout layer")
        for lower, upper in zip(self.layers, self.layers[1:]):
            if lower.n_post != upper.n_pre:
                raise ValidationError(f"layer widths do not chain: {lower.n_post} -> {upper.n_pre}")
        if not self.layers[-1].is_readout or any(l.is_readout for l in self.layers[:-1]):
            raise ValidationError("exactly the final layer must be the readout")
        if self.layers[-1].n_post != N_CLASSES:
            raise ValidationError("the readout layer must have 2 neurons (no-speech, speech)")
        if self.delta_t != DELTA_T:
            raise ValidationError("only delta_t = 1 is supported")
        if self.readout_window is not None and not 0 < self.readout_window <= self.T_total:
            raise ValidationError("readout window must lie within T_total")

    @property
    def sizes(self):
        return [self.layers[0].n_pre] + [l.n_post for l in self.layers]

    @property
    def n_weights(self):
        return sum(l.weights.size for l in self.layers)

    @property
    def n_neurons(self):
        return sum(self.sizes)

    def weights(self):
        return [l.weights for l in self.layers]

    def copy(self):
        return copy.deepcopy(self)


# --- architectures -----------------------------------------------------------


def init_weights(sizes, seed):
    """Gaussian init with std ``1/sqrt(n_pre)`` per layer, from a single seeded generator."""
    rng = np.random.default_rng(seed)
    return [rng.normal(0.0, 1.0 / np.sqrt(n_pre), size=(n_pre, n_post))
            for n_pre, n_post in zip(sizes[:-1], sizes[1:])]


def build_network(sizes, tau_mem, tau_syn=5.0, T_total=100, readout_window=None, seed=0,
                  name="custom", weights=None):
    """Feedforward LIF network; ``tau_mem`` is a scalar or one value per non-input layer."""
    sizes = [int(s) for s in sizes]
    n_layers = len(sizes) - 1
    tau_mem = np.broadcast_to(np.asarray(tau_mem, dtype=np.float64), (n_layers,))
    tau_syn = np.broadcast_to(np.asarray(tau_syn, dtype=np.float64), (n_layers,))
    if weights is None:
        weights = init_weights(sizes, seed)
    layers = [
        LifLayerParams(w, float(tm), float(ts), is_readout=(i == n_layers - 1))
        for i, (w, tm, ts) in enumerate(zip(weights, tau_mem, tau_syn))
    ]
    return NetworkModel(layers, int(T_total), readout_window, name=name)


ARCHITECTURES = {
    # 128-200-2, one frame of 100 steps
    "h1": dict(sizes=(N_INPUT, 200, N_CLASSES), tau_mem=(10.0, 10.0), T_total=100,
               readout_window=None, n_weights=26_000),
    # 128-100-15-2, five frames of 100 steps, decision on the last frame
    "h2": dict(sizes=(N_INPUT, 100, 15, N_CLASSES), tau_mem=(10.0, 300.0, 10.0), T_total=500,
               readout_window=100, n_weights=14_330),
}


def make_architecture(name, seed=0, steps_per_frame=100):
    if name not in ARCHITECTURES:
        raise ValidationError(f"unknown architecture {name!r}; choose from {sorted(ARCHITECTURES)}")
    preset = ARCHITECTURES[name]
    frames = preset["T_total"] // 100
    window = None if preset["readout_window"] is None else steps_per_frame
    model = build_network(preset["sizes"], preset["tau_mem"], 5.0, frames * steps_per_frame,
                          window, seed=seed, name=name)
    if model.n_weights != preset["n_weights"]:
        raise ValidationError(f"{name} has {model.n_weights} weights, expected {preset['n_weights']}")
    return model


def validate_architecture(model):
    """Check a model that claims a named preset against the preset's layer shapes."""
    if model.name in ARCHITECTURES:
        preset = ARCHITECTURES[model.name]
        if tuple(model.sizes) != preset["sizes"]:
            raise ValidationError(
                f"model named {model.name!r} has sizes {model.sizes}, expected {list(preset['sizes'])}"
            )


# --- simulation --------------------------------------------------------------


@dataclass
class ForwardTrace:
    """Per-layer V, I, S at every step, plus the input raster.

    Arrays are ``(B, T, n)``. ``batched`` records whether the caller passed a
    single raster, in which case the accessors drop the batch axis.
    """

    inputs: np.ndarray
    V: list
    I: list
    S: list
    batched: bool = True
    smooth: bool = False

    def _view(self, a):
        return a if self.batched else a[0]

    def voltage(self, layer):
        return self._view(self.V[layer])

    def current(self, layer):
        return self._view(self.I[layer])

    def spikes(self, layer):
        return self._view(self.S[layer])

    @property
    def readout(self):
        """Readout voltage traces, ``(..., T, 2)``: channel 0 no-speech, 1 speech."""
        return self._view(self.V[-1])

    @property
    def n_steps(self):
        return self.inputs.shape[1]


def _as_batch(raster):
    raster = np.asarray(raster)
    if raster.ndim == 2:
        return raster[None], False
    if raster.ndim == 3:
        return raster, True
    raise ValidationError(f"raster must be (T, K) or (B, T, K), got shape {raster.shape}")


def forward(model, raster, smooth=False, frozen_reset=None, record_current=True):
    """Simulate the network on one raster ``(T, K)`` or a batch ``(B, T, K)``.

    ``smooth`` swaps the hidden Heaviside for ``f(u) = u / (1 + lam |u|)`` (used
    by gradient checks). ``frozen_reset`` supplies a per-layer reset sequence
    in place of the emitted spikes, which lets a finite-difference oracle see
    the same detached reset as the backward pass. ``record_current=False``
    leaves ``trace.I`` entries as ``None`` (training does not need them).
    """
    x, batched = _as_batch(raster)
    if x.shape[2] != model.layers[0].n_pre:
        raise ValidationError(f"raster width {x.shape[2]} != input size {model.layers[0].n_pre}")
    if x.shape[1] != model.T_total:
        raise ValidationError(f"raster length {x.shape[1]} != T_total {model.T_total}")
    x = kernels._spikes(x)
    Vs, Is, Ss = [], [], []
    layer_in = x
    for li, layer in enumerate(model.layers):
        mode = kernels.READOUT if layer.is_readout else (kernels.SMOOTH if smooth else kernels.HARD)
        reset = None if frozen_reset is None or layer.is_readout else frozen_reset[li]
        V, I, S = kernels.layer_forward(layer_in, layer.effective_weights(), layer.alpha, layer.beta,
                                        layer.theta, model.surrogate_lambda, mode, reset,
                                        record_current)
        Vs.append(V)
        Is.append(I)
        Ss.append(S)
        layer_in = S
    return ForwardTrace(x, Vs, Is, Ss, batched=batched, smooth=smooth)


def surrogate_grad(V, theta=THETA, lam=SURROGATE_LAMBDA):
    """Fast-sigmoid derivative used in place of dS/dV."""
    return 1.0 / (1.0 + lam * np.abs(np.asarray(V, dtype=np.float64) - theta)) ** 2


def backward(model, trace, grad_out, reset_grad=False):
    """Weight gradients by backpropagation through time.

    ``grad_out`` is dL/dV_readout with the same shape as ``trace.readout``.
    Returns one gradient per layer, zeroed where the layer is masked. With
    ``reset_grad=True`` the gradient also flows through the reset term (not
    used for training; kept for comparison).
    """
    if len(trace.V) != len(model.layers):
        raise ValidationError("trace does not belong to this model")
    g = np.asarray(grad_out, dtype=np.float64)
    if not trace.batched:
        g = g[None]
    if g.shape != trace.V[-1].shape:
        raise ValidationError(f"grad_out shape {g.shape} does not match readout {trace.V[-1].shape}")
    grads = [None] * len(model.layers)
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        x = trace.inputs if li == 0 else trace.S[li - 1]
        mode = kernels.READOUT if layer.is_readout else kernels.HARD
        dW, gx = kernels.layer_backward(x, layer.effective_weights(), trace.V[li], g, layer.alpha,
                                        layer.beta, layer.theta, model.surrogate_lambda, mode,
                                        1.0 if reset_grad else 0.0, need_gx=li > 0)
        if layer.mask is not None:
            dW = dW * layer.mask
        grads[li] = dW
        g = gx
    return grads


def readout_max(trace, window=None):
    """Per-class maximum readout voltage and the first step attaining it.

    ``window`` restricts the search to the last ``window`` steps (the final
    frame for multi-frame inputs). Returns ``(maxima, argmax)``, each
    ``(..., 2)``; argmax indices are absolute step numbers.
    """
    V = trace.readout if isinstance(trace, ForwardTrace) else np.asarray(trace)
    start = 0 if window is None else V.shape[-2] - window
    sub = V[..., start:, :]
    idx = np.argmax(sub, axis=-2)
    maxima = np.take_along_axis(sub, idx[..., None, :], axis=-2)[..., 0, :]
    return maxima, idx + start


def readout_scores(model, raster):
    """Decision score max(V_speech) - max(V_no_speech) per sample."""
    maxima, _ = readout_max(forward(model, raster), model.readout_window)
    return maxima[..., 1] - maxima[..., 0]
