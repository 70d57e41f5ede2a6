"""Synthetic data: a separable TTFS toy task and a labelled WAV corpus.

The corpus stands in for a licensed noisy-speech database. "Speech" is a
harmonic stack with a syllable-rate envelope, placed on the 16 ms frame grid
so that frame labels are exact under majority-overlap labelling, and mixed
into low-pass shaped noise at a requested SNR.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio import HOP, SAMPLE_RATE, WINDOW, write_wav
from .encoding import encode_frames
from .errors import ValidationError

MIN_RUN = 3  # frames; shorter runs would not survive majority-overlap labelling
SNR_RANGE = (-30.0, 40.0)


def make_toy_task(n_samples=64, n_inputs=128, T=100, noise=0.05, seed=0):
    """Two well separated prototype frames plus small jitter, TTFS encoded.

    Returns ``(rasters (N, T, K) uint8, labels (N,))`` with balanced classes.
    """
    rng = np.random.default_rng(seed)
    protos = rng.uniform(0.0, 1.0, size=(2, n_inputs))
    labels = np.arange(n_samples) % 2
    rng.shuffle(labels)
    frames = np.clip(protos[labels] + rng.normal(0.0, noise, size=(n_samples, n_inputs)), 0.0, 1.0)
    return encode_frames(frames, T), labels


def n_frames_for(n_samples):
    return (n_samples - WINDOW) // HOP + 1


def frame_runs(n_frames, speech_fraction, rng, mean_run=40):
    """Alternating label runs with exactly ``round(speech_fraction * n_frames)`` speech frames."""
    n_pos = int(np.floor(speech_fraction * n_frames + 0.5))
    n_neg = n_frames - n_pos
    labels = np.zeros(n_frames, dtype=np.int64)
    if n_pos == 0:
        return labels
    if n_pos < MIN_RUN or (0 < n_neg < MIN_RUN):
        raise ValidationError("speech fraction leaves runs shorter than three frames")
    runs = max(1, min(n_pos // mean_run, n_pos // MIN_RUN, n_neg // MIN_RUN + 1 if n_neg else 1))
    pos_sizes = MIN_RUN + rng.multinomial(n_pos - MIN_RUN * runs, np.full(runs, 1.0 / runs))
    inner = runs - 1
    free_neg = n_neg - MIN_RUN * inner
    gaps = rng.multinomial(free_neg, np.full(runs + 1, 1.0 / (runs + 1)))
    gaps[1:-1] += MIN_RUN
    pos = gaps[0]
    for i in range(runs):
        labels[pos:pos + pos_sizes[i]] = 1
        pos += pos_sizes[i] + gaps[i + 1]
    return labels


def speech_sample_mask(labels, n_samples):
    """Sample-level activity such that window ``i`` is majority-covered iff ``labels[i]``.

    A run of frames ``[a, b)`` maps to samples ``[256a + 384, 256b + 384)``.
    """
    active = np.zeros(n_samples, dtype=bool)
    edges = np.diff(np.concatenate(([0], labels, [0])))
    starts, ends = np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)
    offset = WINDOW // 2 - HOP // 2
    for a, b in zip(starts, ends):
        active[a * HOP + offset:min(b * HOP + offset, n_samples)] = True
    return active


def harmonic_speech(active, rng, sample_rate=SAMPLE_RATE):
    """Voiced-like bursts on the active samples, silent elsewhere."""
    n = active.shape[0]
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    edges = np.diff(np.concatenate(([False], active, [False])).astype(np.int8))
    for a, b in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        f0 = rng.uniform(100.0, 220.0)
        tt = t[a:b] - t[a]
        glide = f0 * (1.0 + 0.05 * np.sin(2 * np.pi * 0.7 * tt))
        phase = 2 * np.pi * np.cumsum(glide) / sample_rate
        seg = sum(np.sin(h * phase) / h for h in range(1, 13))
        seg *= 1.0 + 0.6 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * tt)
        out[a:b] = seg
    return out


def shaped_noise(n, rng, pole=0.9):
    return lfilter([1.0], [1.0, -pole], rng.standard_normal(n))


def snr_db(speech, noise, active):
    """Mean speech power over active samples relative to mean noise power over the file."""
    return 10.0 * np.log10(np.mean(speech[active] ** 2) / np.mean(noise ** 2))


@dataclass
class SynthClip:
    mixture: np.ndarray
    speech: np.ndarray
    noise: np.ndarray
    labels: np.ndarray
    active: np.ndarray
    snr: float


def synthesize(duration, snr, speech_fraction=0.5, seed=0, peak=0.9):
    """One clip with exact frame labels; speech and noise are scaled by the same peak gain."""
    if not SNR_RANGE[0] <= snr <= SNR_RANGE[1]:
        raise ValidationError(f"SNR {snr} dB outside supported range {SNR_RANGE}")
    if not 0.0 <= speech_fraction <= 1.0:
        raise ValidationError("speech fraction must be in [0, 1]")
    n = int(round(duration * SAMPLE_RATE))
    if n < WINDOW:
        raise ValidationError("clip shorter than one analysis window")
    rng = np.random.default_rng(seed)
    labels = frame_runs(n_frames_for(n), speech_fraction, rng)
    active = speech_sample_mask(labels, n)
    speech = harmonic_speech(active, rng)
    noise = shaped_noise(n, rng)
    if active.any():
        p_speech = np.mean(speech[active] ** 2)
        noise *= np.sqrt(p_speech / (np.mean(noise ** 2) * 10.0 ** (snr / 10.0)))
    else:
        noise /= np.sqrt(np.mean(noise ** 2)) * 10.0
    mix = speech + noise
    gain = peak / np.max(np.abs(mix))
    return SynthClip(mix * gain, speech * gain, noise * gain, labels, active, float(snr))


def write_labels(path, labels):
    with open(path, "w") as fh:
        fh.write("frame_index,label\n")
        for i, y in enumerate(labels):
            fh.write(f"{i},{int(y)}\n")


def generate_corpus(out_dir, snrs, duration=10.0, files_per_snr=1, speech_fraction=0.5, seed=0):
    """Write ``<stem>.wav`` and ``<stem>.csv`` pairs; returns the stems written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stems = []
    for si, snr in enumerate(snrs):
        for k in range(files_per_snr):
            clip = synthesize(duration, float(snr), speech_fraction, seed=seed * 100_003 + si * 1009 + k)
            stem = f"synth_snr{float(snr):+g}dB_{k:03d}"
            write_wav(out / f"{stem}.wav", clip.mixture)
            write_labels(out / f"{stem}.csv", clip.labels)
            stems.append(stem)
    return stems
