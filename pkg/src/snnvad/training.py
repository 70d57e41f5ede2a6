"""Max-voltage cross-entropy loss, Adam, and the BPTT training loop."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError, ValidationError
from .network import backward, forward, readout_max

log = logging.getLogger(__name__)

LEARNING_RATE = 1e-4
BATCH_SIZE = 256


@dataclass(frozen=True)
class LossConfig:
    class_weights: tuple = (1.0, 1.0)

    def __post_init__(self):
        if len(self.class_weights) != 2 or min(self.class_weights) <= 0:
            raise ValidationError("class weights must be two positive numbers")


BALANCED = LossConfig((1.0, 1.0))
# DCF costs (0.25 false alarm, 0.75 miss) rescaled to average 1
DCF_WEIGHTED = LossConfig((0.5, 1.5))

LOSS_CONFIGS = {"balanced": BALANCED, "dcf": DCF_WEIGHTED}


def loss_and_grad(maxima, labels, cfg=BALANCED):
    """Weighted softmax cross-entropy on the two readout maxima.

    ``maxima`` is ``(B, 2)``, ``labels`` ``(B,)`` in {0, 1}. Returns per-sample
    losses ``(B,)`` and dL/dmaxima ``(B, 2)``.
    """
    m = np.atleast_2d(np.asarray(maxima, dtype=np.float64))
    y = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    w = np.asarray(cfg.class_weights, dtype=np.float64)[y]
    shifted = m - m.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(len(y))
    losses = w * (log_z - shifted[rows, y])
    p = np.exp(shifted - log_z[:, None])
    p[rows, y] -= 1.0
    return losses, w[:, None] * p


def loss(maxima, label, cfg=BALANCED):
    """Loss for one sample: ``-w[label] * ln softmax(maxima)[label]``."""
    return float(loss_and_grad(maxima, [label], cfg)[0][0])


@dataclass
class OptimizerState:
    m: list
    v: list
    step: int = 0
    learning_rate: float = LEARNING_RATE
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state, masks=None):
    """Bias-corrected Adam update, in place. Masked entries are forced back to 0."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValidationError("parameter, gradient and optimizer-state lists differ in length")
    for i, g in enumerate(grads):
        if g.shape != params[i].shape:
            raise ValidationError(f"gradient {i} has shape {g.shape}, parameter has {params[i].shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.isfinite(g).sum())
            raise NumericError(f"non-finite gradient in parameter {i} ({bad} entries) at step {state.step + 1}")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        mask = None if masks is None else masks[i]
        if mask is not None:
            g = g * mask
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
        if mask is not None:
            p *= mask
    return params, state


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    accuracy: float
    mean_hidden_spikes: float


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    steps: int = 0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss", "accuracy", "mean_hidden_spikes_per_sample"])
            for r in self.epochs:
                writer.writerow([r.epoch, repr(r.mean_loss), repr(r.accuracy), repr(r.mean_hidden_spikes)])


def batch_gradients(model, x, y, cfg=BALANCED):
    """Forward + backward on one batch. Returns (losses, grads, scores, hidden spike counts)."""
    trace = forward(model, x, record_current=False)
    maxima, argmax = readout_max(trace, model.readout_window)
    losses, g_max = loss_and_grad(maxima, y, cfg)
    B = len(y)
    grad_out = np.zeros_like(trace.V[-1])
    rows = np.arange(B)
    for c in range(2):
        grad_out[rows, argmax[:, c], c] += g_max[:, c] / B
    grads = backward(model, trace, grad_out)
    scores = maxima[:, 1] - maxima[:, 0]
    hidden = sum(S.sum(axis=(1, 2)) for S in trace.S[:-1]) if len(trace.S) > 1 else np.zeros(B)
    return losses, grads, scores, hidden


def train(model, rasters, labels, epochs, batch_size=BATCH_SIZE, cfg=BALANCED, seed=0,
          learning_rate=LEARNING_RATE, max_steps=None, target_accuracy=None, state=None):
    """Train a copy of ``model`` with minibatch Adam; returns ``(model, history)``.

    Shuffling is driven by ``seed`` so runs are reproducible. Training stops
    after ``epochs`` epochs, after ``max_steps`` optimizer steps, or at the end
    of the first epoch whose running accuracy reaches ``target_accuracy``.
    """
    rasters = np.asarray(rasters)
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise DataError("cannot train on an empty dataset")
    if rasters.shape[0] != labels.shape[0]:
        raise ValidationError("rasters and labels differ in length")
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 (no-speech) or 1 (speech)")
    model = model.copy()
    history = TrainHistory()
    if epochs <= 0:
        return model, history
    rng = np.random.default_rng(seed)
    params = model.weights()
    masks = [l.mask for l in model.layers]
    if state is None:
        state = OptimizerState.for_params(params, learning_rate=learning_rate)
    n = len(labels)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total_loss = correct = spikes = 0.0
        seen = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            y = labels[idx]
            losses, grads, scores, hidden = batch_gradients(model, rasters[idx], y, cfg)
            if not np.all(np.isfinite(losses)):
                raise NumericError(f"non-finite loss in epoch {epoch}")
            adam_step(params, grads, state, masks)
            history.steps += 1
            total_loss += losses.sum()
            correct += np.sum((scores > 0) == (y == 1))
            spikes += hidden.sum()
            seen += len(idx)
            if max_steps is not None and history.steps >= max_steps:
                break
        rec = EpochRecord(epoch, float(total_loss / seen), float(correct / seen), float(spikes / seen))
        history.epochs.append(rec)
        log.debug("epoch %d loss %.5f acc %.4f spikes %.1f", epoch, rec.mean_loss, rec.accuracy,
                  rec.mean_hidden_spikes)
        if max_steps is not None and history.steps >= max_steps:
            break
        if target_accuracy is not None and rec.accuracy >= target_accuracy:
            break
    return model, history


def accuracy(model, rasters, labels, rho=0.0, batch_size=BATCH_SIZE):
    """Fraction of samples whose thresholded score matches the label (no smoothing)."""
    labels = np.asarray(labels)
    correct = 0
    for start in range(0, len(labels), batch_size):
        trace = forward(model, rasters[start:start + batch_size], record_current=False)
        maxima, _ = readout_max(trace, model.readout_window)
        pred = (maxima[:, 1] - maxima[:, 0]) > rho
        correct += int(np.sum(pred == (labels[start:start + batch_size] == 1)))
    return correct / len(labels)


# --- gradient check ----------------------------------------------------------


@dataclass
class GradCheckResult:
    applicable: bool
    max_rel_error: float | None = None
    n_params: int = 0
    reason: str = ""


def gradient_check(model, raster, label, mode="smoothed", step=1e-4, cfg=BALANCED):
    """Compare BPTT weight gradients with central finite differences.

    Only meaningful with the smoothed activation, whose derivative is exactly
    the surrogate; the Heaviside network is piecewise constant in its
    weights, so ``mode="hard"`` returns a not-applicable result. The reset
    sequence and the argmax steps of the readout are frozen at their nominal
    values during the perturbed runs, which is precisely what the detached,
    first-argmax backward differentiates.
    """
    if mode != "smoothed":
        return GradCheckResult(False, reason="surrogate gradient is not the derivative of the Heaviside network")
    raster = np.asarray(raster, dtype=np.float64)
    trace = forward(model, raster, smooth=True)
    frozen = [S.copy() for S in trace.S]
    maxima, argmax = readout_max(trace, model.readout_window)
    _, g_max = loss_and_grad(maxima[None], [label], cfg)
    grad_out = np.zeros_like(trace.readout)
    for c in range(2):
        grad_out[argmax[c], c] += g_max[0, c]
    analytic = backward(model, trace, grad_out)

    def objective(m):
        t = forward(m, raster, smooth=True, frozen_reset=frozen)
        return loss(t.readout[argmax, [0, 1]], label, cfg)

    probe = model.copy()
    worst, count = 0.0, 0
    for li, layer in enumerate(probe.layers):
        W = layer.weights
        for idx in np.ndindex(W.shape):
            if layer.mask is not None and not layer.mask[idx]:
                continue
            orig = W[idx]
            W[idx] = orig + step
            up = objective(probe)
            W[idx] = orig - step
            down = objective(probe)
            W[idx] = orig
            fd = (up - down) / (2.0 * step)
            worst = max(worst, abs(analytic[li][idx] - fd) / max(abs(fd), 1e-8))
            count += 1
    return GradCheckResult(True, worst, count)
