"""Corpus ingestion: feature/WAV files paired with frame or segment label files."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import HOP, SAMPLE_RATE, WINDOW, extract_features, normalize, read_features, read_wav
from .encoding import encode_context, encode_frames
from .errors import DataError

log = logging.getLogger(__name__)


def segments_to_frame_labels(segments, n_frames):
    """Label each 1024-sample window by majority overlap with speech segments.

    ``segments`` are ``(start_sec, end_sec, label)`` triples; a window is
    speech when more than half of its samples lie inside label-1 segments.
    """
    n_samples = (n_frames - 1) * HOP + WINDOW
    active = np.zeros(n_samples + 1, dtype=np.int64)
    for start, end, label in segments:
        if int(label) != 1:
            continue
        a = max(0, int(round(float(start) * SAMPLE_RATE)))
        b = min(n_samples, int(round(float(end) * SAMPLE_RATE)))
        if b > a:
            active[a] += 1
            active[b] -= 1
    covered = (np.cumsum(active)[:n_samples] > 0).astype(np.int64)
    csum = np.concatenate(([0], np.cumsum(covered)))
    starts = np.arange(n_frames) * HOP
    overlap = csum[starts + WINDOW] - csum[starts]
    return (overlap * 2 > WINDOW).astype(np.int64)


def read_labels(path, n_frames=None):
    """Read ``frame_index,label`` or ``start_sec,end_sec,label`` CSV files into frame labels."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read labels {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: empty label file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    try:
        if header == ["frame_index", "label"]:
            idx = np.array([int(r[0]) for r in body], dtype=np.int64)
            lab = np.array([int(r[1]) for r in body], dtype=np.int64)
            if not np.array_equal(idx, np.arange(len(idx))):
                raise DataError(f"{path}: frame indices must run 0..N-1 in order")
        elif header == ["start_sec", "end_sec", "label"]:
            if n_frames is None:
                raise DataError(f"{path}: segment labels need the frame count of the audio")
            lab = segments_to_frame_labels([(float(a), float(b), int(c)) for a, b, c in body], n_frames)
        else:
            raise DataError(f"{path}: unrecognised label header {header}")
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed label row ({exc})") from exc
    if not np.isin(lab, (0, 1)).all():
        raise DataError(f"{path}: labels must be 0 or 1")
    if n_frames is not None and len(lab) != n_frames:
        raise DataError(f"{path}: {len(lab)} labels for {n_frames} feature frames")
    return lab


@dataclass
class Utterance:
    name: str
    features: np.ndarray  # (n_frames, 128), unnormalized log-Mel
    labels: np.ndarray | None


def load_corpus(data_dir, labels_dir=None, require_labels=True):
    """Load every ``*.svfe`` feature file in ``data_dir``, or every ``*.wav`` if there are none.

    Labels are looked up as ``<stem>.csv`` in ``labels_dir`` (default: ``data_dir``).
    """
    data_dir = Path(data_dir)
    labels_dir = Path(labels_dir) if labels_dir else data_dir
    if not data_dir.is_dir():
        raise DataError(f"data directory {data_dir} does not exist")
    feats = sorted(data_dir.glob("*.svfe"))
    sources = feats or sorted(data_dir.glob("*.wav"))
    if not sources:
        raise DataError(f"no .svfe or .wav files in {data_dir}")
    out = []
    for src in sources:
        x = read_features(src) if src.suffix == ".svfe" else extract_features(read_wav(src))
        lab_path = labels_dir / f"{src.stem}.csv"
        if lab_path.exists():
            y = read_labels(lab_path, n_frames=x.shape[0])
        elif require_labels:
            raise DataError(f"missing labels for {src.name} (expected {lab_path})")
        else:
            y = None
        out.append(Utterance(src.stem, x, y))
    return out


def encode_utterance(utt, normalizer, T=100, context=1, clip=True):
    """Normalized, TTFS-encoded rasters for every frame of one utterance."""
    x = normalize(utt.features, normalizer, clip=clip)
    if context == 1:
        return encode_frames(x, T)
    return encode_context(x, T, context)


def build_dataset(utterances, normalizer, T=100, context=1, clip=True):
    """Stack rasters ``(N, context*T, 128)`` and labels ``(N,)`` across utterances."""
    rasters, labels = [], []
    for utt in utterances:
        rasters.append(encode_utterance(utt, normalizer, T, context, clip))
        labels.append(utt.labels)
    return np.concatenate(rasters), np.concatenate(labels).astype(np.int64)
