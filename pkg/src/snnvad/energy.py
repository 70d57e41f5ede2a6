"""Spike statistics and linear power scaling from a reference chip operating point."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

TRUENORTH_NEURONS = 4096 * 256


@dataclass(frozen=True)
class PowerReference:
    """Total chip power measured at a given (spike rate, active synapses) operating point."""

    total_chip_power: float  # W
    rate: float = 0.0
    active_synapses: float = 0.0
    chip_neurons: int = TRUENORTH_NEURONS
    name: str = ""

    def __post_init__(self):
        if self.total_chip_power <= 0 or self.chip_neurons <= 0:
            raise ValidationError("reference power and chip neuron count must be positive")


PRESETS = {
    "truenorth-dense": PowerReference(105e-3, rate=3.7, active_synapses=80, name="truenorth-dense"),
    "truenorth-sparse": PowerReference(80e-3, rate=1.8, active_synapses=13, name="truenorth-sparse"),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown power preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class SpikeStats:
    """Per-inference averages. Index 0 is the input layer, the last entry the readout."""

    rates: list  # mean spikes per neuron
    sops: list  # synaptic events leaving each layer
    active_synapses: list  # per receiving layer; 0.0 for the input layer
    n_inferences: int
    mean_active_synapses: float = 0.0  # over all non-input neurons

    @property
    def total_sops(self):
        return float(sum(self.sops))


def _fanout(layer):
    if layer.mask is None:
        return np.full(layer.n_pre, layer.n_post, dtype=np.float64)
    return layer.mask.sum(axis=1).astype(np.float64)


def _connected(layer):
    if layer.mask is None:
        return np.ones(layer.weights.shape, dtype=np.float64)
    return layer.mask.astype(np.float64)


def spike_stats(trace, model):
    """Rates, synaptic operations and active synapses averaged over the traced inferences.

    A connection counts as active in an inference when it survives pruning
    and its presynaptic neuron spiked at least once.
    """
    if trace.smooth:
        raise ValidationError("spike statistics need a Heaviside (non-smoothed) trace")
    spikes = [trace.inputs] + list(trace.S)  # (B, T, n) each; readout S is all zeros
    B = trace.inputs.shape[0]
    counts = [s.sum(axis=1) for s in spikes]  # (B, n)
    rates = [float(c.sum() / (B * c.shape[1])) for c in counts]
    sops = []
    active = [0.0]
    total_active = 0.0
    total_post = 0
    for li, layer in enumerate(model.layers):
        sops.append(float((counts[li] @ _fanout(layer)).sum() / B))
        fired = (counts[li] > 0).astype(np.float64)  # (B, n_pre)
        per_post = fired @ _connected(layer)  # (B, n_post)
        active.append(float(per_post.mean()))
        total_active += float(per_post.sum() / B)
        total_post += layer.n_post
    sops.append(0.0)
    return SpikeStats(rates, sops, active, B, total_active / total_post)


def estimate_power(stats, ref, n_neurons):
    """Scale the reference chip power by the fraction of its neurons the network uses.

    ``stats`` is accepted for interface symmetry: the rate/synapse dependence of
    chip power is already folded into ``ref``.
    """
    if n_neurons < 0:
        raise ValidationError("neuron count must be non-negative")
    return ref.total_chip_power * n_neurons / ref.chip_neurons


def write_energy_csv(path, stats, power, ref):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "rate", "active_synapses", "sops"])
        for i, (r, a, s) in enumerate(zip(stats.rates, stats.active_synapses, stats.sops)):
            w.writerow([i, repr(r), repr(a), repr(s)])
        w.writerow(["total", "", repr(stats.mean_active_synapses), repr(stats.total_sops)])
        w.writerow(["power_w", repr(power), ref.name, ""])
