"""Iterative magnitude pruning with rewinding to the original initialization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_SCHEDULE = (0.70, 0.40, 0.20, 0.15)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass(frozen=True)
class PruneMask:
    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if not np.isin(m, (0, 1)).all():
            raise ValidationError("mask entries must be 0 or 1")
        object.__setattr__(self, "mask", m.astype(np.uint8))

    @classmethod
    def full(cls, shape):
        return cls(np.ones(shape, dtype=np.uint8))

    @property
    def count(self):
        return int(self.mask.sum())

    @property
    def density(self):
        return self.count / self.mask.size

    def is_subset_of(self, other):
        return bool(np.all(self.mask <= other.mask))


@dataclass(frozen=True)
class TicketSchedule:
    """Fractions of the original connections kept after each pruning round."""

    keep_fractions: tuple = DEFAULT_SCHEDULE

    def __post_init__(self):
        fr = tuple(float(f) for f in self.keep_fractions)
        if any(not 0.0 < f <= 1.0 for f in fr):
            raise ValidationError("keep fractions must lie in (0, 1]")
        if any(b >= a for a, b in zip(fr, fr[1:])):
            raise ValidationError("keep fractions must be strictly decreasing")
        object.__setattr__(self, "keep_fractions", fr)

    def __len__(self):
        return len(self.keep_fractions)


def magnitude_prune(weights, current_mask, keep_fraction):
    """Keep the ``round(keep_fraction * size)`` largest-magnitude surviving weights.

    Ties are broken in favour of the lower flat index.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if current_mask is None:
        current_mask = PruneMask.full(weights.shape)
    if current_mask.mask.shape != weights.shape:
        raise ValidationError("mask shape does not match weights")
    if keep_fraction >= current_mask.density:
        raise ValidationError(
            f"keep fraction {keep_fraction} must be below the current density {current_mask.density:.4f}"
        )
    n_keep = _round_half_up(keep_fraction * weights.size)
    alive = np.flatnonzero(current_mask.mask.ravel())
    mags = np.abs(weights.ravel()[alive])
    # lexsort: last key is primary -> descending magnitude, then ascending index
    order = np.lexsort((alive, -mags))
    out = np.zeros(weights.size, dtype=np.uint8)
    out[alive[order[:n_keep]]] = 1
    return PruneMask(out.reshape(weights.shape))


def apply_mask(params, mask):
    """Elementwise product of weights and mask."""
    m = mask.mask if isinstance(mask, PruneMask) else np.asarray(mask)
    params = np.asarray(params)
    if m.shape != params.shape:
        raise ValidationError(f"mask shape {m.shape} does not match weights {params.shape}")
    return np.where(m != 0, params, 0.0)


@dataclass
class TicketRound:
    mask: PruneMask
    model: object
    metrics: dict


def lottery_loop(init_model, schedule, train_fn, layer=0, dense=None):
    """Train, prune, rewind, repeat.

    ``train_fn(model) -> (trained_model, metrics)`` performs one full training
    run. Round 0 is the dense run; round ``i`` restarts from the original
    initialization with the mask found after round ``i - 1``. Only the weights
    of ``layer`` (input -> hidden by default) are pruned. Passing an already
    trained ``dense`` result ``(model, metrics)`` skips the dense run.
    """
    if not isinstance(schedule, TicketSchedule):
        schedule = TicketSchedule(tuple(schedule))
    init_model = init_model.copy()
    init_w = init_model.layers[layer].weights.copy()
    mask = PruneMask.full(init_w.shape)
    rounds = []
    for i in range(len(schedule) + 1):
        start = init_model.copy()
        start.layers[layer].weights = apply_mask(init_w, mask)
        start.layers[layer].mask = None if i == 0 else mask.mask.copy()
        if i == 0 and dense is not None:
            trained, metrics = dense
        else:
            trained, metrics = train_fn(start)
        rounds.append(TicketRound(mask, trained, metrics))
        if i < len(schedule):
            mask = magnitude_prune(trained.layers[layer].weights, mask, schedule.keep_fractions[i])
    return rounds
