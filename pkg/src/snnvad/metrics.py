"""Frame decisions, median smoothing, and DCF / HTER / ROC evaluation."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import median_filter

from .errors import DataError, ValidationError

MEDIAN_SIZE = 11
DCF_FA_WEIGHT = 0.25
DCF_MISS_WEIGHT = 0.75


def classify(score, rho=0.0):
    """1 (speech) where ``score > rho``, else 0."""
    out = np.asarray(score) > rho
    return out.astype(np.int64) if out.ndim else int(out)


def median_smooth(labels, size=MEDIAN_SIZE):
    """Majority vote over a centred window of odd ``size``, edges replicated."""
    if size < 1 or size % 2 == 0:
        raise ValidationError(f"median filter size must be odd and positive, got {size}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return labels
    half = size // 2
    # replicate edges ourselves: scipy mishandles "nearest" on very short inputs
    padded = np.pad(labels, half, mode="edge")
    return median_filter(padded, size=size, mode="nearest")[half:half + labels.size]


def dcf(far, mr):
    return DCF_FA_WEIGHT * far + DCF_MISS_WEIGHT * mr


def hter(far, mr):
    return 0.5 * (far + mr)


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    rho: float = 0.0
    roc_points: list = field(default_factory=list)

    @property
    def far(self):
        return self.fp / (self.fp + self.tn)

    @property
    def mr(self):
        return self.fn / (self.fn + self.tp)

    @property
    def hit_rate(self):
        return 1.0 - self.mr

    @property
    def dcf(self):
        return dcf(self.far, self.mr)

    @property
    def hter(self):
        return hter(self.far, self.mr)

    def rows(self):
        return [
            ("rate", "far", self.far),
            ("rate", "mr", self.mr),
            ("score", "dcf", self.dcf),
            ("score", "hter", self.hter),
            ("count", "tp", self.tp),
            ("count", "fp", self.fp),
            ("count", "tn", self.tn),
            ("count", "fn", self.fn),
            ("param", "rho", self.rho),
        ]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "name", "value"])
            w.writerows(self.rows())


def confusion(pred, truth):
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ValidationError("predictions and ground truth differ in length")
    return (int(np.sum(pred & truth)), int(np.sum(pred & ~truth)),
            int(np.sum(~pred & ~truth)), int(np.sum(~pred & truth)))


def _as_sequences(x):
    if isinstance(x, (list, tuple)):
        return [np.asarray(a) for a in x]
    return [np.asarray(x)]


def _predict(scores, rho, smooth_size):
    """Threshold and smooth each sequence separately, then concatenate."""
    preds = []
    for s in _as_sequences(scores):
        p = classify(np.asarray(s, dtype=np.float64), rho)
        preds.append(median_smooth(p, smooth_size) if smooth_size else p)
    return np.concatenate(preds)


def _check_truth(truth):
    truth = np.concatenate(_as_sequences(truth)).astype(np.int64)
    if not np.isin(truth, (0, 1)).all():
        raise DataError("ground-truth labels must be 0 or 1")
    if truth.sum() == 0 or truth.sum() == truth.size:
        raise DataError("evaluation needs both speech and non-speech frames; rates are undefined")
    return truth


def evaluate(scores, truth, rho=0.0, smooth_size=MEDIAN_SIZE):
    """Threshold, optionally median-smooth (``smooth_size=None`` disables), then count.

    ``scores`` and ``truth`` may be single arrays or matching lists of arrays
    (one per utterance); smoothing never crosses utterance boundaries.
    """
    truth = _check_truth(truth)
    pred = _predict(scores, rho, smooth_size)
    return MetricsReport(*confusion(pred, truth), rho=float(rho))


def roc_sweep(scores, truth, rho_grid, smooth_size=MEDIAN_SIZE):
    """``(far, hit_rate, rho)`` for each threshold in ``rho_grid`` (sorted ascending)."""
    rho_grid = np.sort(np.asarray(rho_grid, dtype=np.float64))
    if rho_grid.size < 2:
        raise ValidationError("an ROC sweep needs at least two thresholds")
    truth = _check_truth(truth)
    points = []
    for rho in rho_grid:
        r = evaluate(scores, truth, rho, smooth_size)
        points.append((r.far, r.hit_rate, float(rho)))
    return points


def default_rho_grid(scores, n=101):
    """Thresholds spanning the observed scores, padded so both extremes are reached."""
    scores = np.concatenate(_as_sequences(scores)).astype(np.float64)
    lo, hi = float(scores.min()), float(scores.max())
    pad = max(1e-6, 0.01 * (hi - lo))
    return np.linspace(lo - pad, hi + pad, n)


def write_roc_csv(path, points):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "far", "hit_rate"])
        for far, hit, rho in points:
            w.writerow([repr(rho), repr(far), repr(hit)])
