"""Time-to-first-spike encoding of normalized feature frames.

A coefficient ``x`` in [0, 1] becomes a single spike at step
``round(T * (1 - x))``, clamped to ``T - 1``. Larger coefficients fire earlier.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError, ValidationError

DEFAULT_STEPS = 100
CONTEXT_FRAMES = 5

RASTER_MAGIC = b"SVSR"


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def spike_times(frame, T=DEFAULT_STEPS):
    """Spike step per coefficient for one frame (or a stack of frames along axis 0)."""
    if T < 1:
        raise ValidationError(f"T must be a positive integer, got {T}")
    x = np.asarray(frame, dtype=np.float64)
    if x.size and (np.isnan(x).any() or x.min() < 0.0 or x.max() > 1.0):
        raise DataError("spike encoding requires coefficients in [0, 1]")
    t = _round_half_away(T * (1.0 - x)).astype(np.int64)
    return np.minimum(t, T - 1)


def encode_frame(frame, T=DEFAULT_STEPS):
    """Encode one normalized frame of K coefficients as a ``(T, K)`` uint8 raster."""
    times = spike_times(frame, T)
    if times.ndim != 1:
        raise ValidationError(f"expected one frame (1-D), got shape {times.shape}")
    raster = np.zeros((T, times.shape[0]), dtype=np.uint8)
    raster[times, np.arange(times.shape[0])] = 1
    return raster


def encode_frames(frames, T=DEFAULT_STEPS):
    """Vectorized :func:`encode_frame` over ``(N, K)`` frames, giving ``(N, T, K)``."""
    times = spike_times(frames, T)
    n, k = times.shape
    rasters = np.zeros((n, T, k), dtype=np.uint8)
    rasters[np.arange(n)[:, None], times, np.arange(k)[None, :]] = 1
    return rasters


def encode_sequence(frames, T=DEFAULT_STEPS):
    """Concatenate the rasters of exactly five consecutive frames along time."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] != CONTEXT_FRAMES:
        raise ValidationError(
            f"a context sequence needs exactly {CONTEXT_FRAMES} frames, got {frames.shape[0] if frames.ndim else 0}"
        )
    return encode_frames(frames, T).reshape(CONTEXT_FRAMES * T, frames.shape[1])


def context_windows(frames, context=CONTEXT_FRAMES):
    """Index array ``(N, context)`` of the frames ending at each position.

    The first frames have no full history; the missing positions repeat frame 0.
    """
    n = np.asarray(frames).shape[0]
    idx = np.arange(n)[:, None] + np.arange(-context + 1, 1)[None, :]
    return np.maximum(idx, 0)


def encode_context(frames, T=DEFAULT_STEPS, context=CONTEXT_FRAMES):
    """Rasters of shape ``(N, context * T, K)``: one multi-frame input per frame."""
    frames = np.asarray(frames, dtype=np.float64)
    single = encode_frames(frames, T)
    stacked = single[context_windows(frames, context)]
    return stacked.reshape(frames.shape[0], context * T, frames.shape[1])


def write_raster(path, raster):
    raster = np.asarray(raster)
    if raster.ndim != 2 or not np.isin(raster, (0, 1)).all():
        raise ValidationError("raster must be a 2-D binary array")
    T, K = raster.shape
    packed = np.packbits(raster.astype(np.uint8), axis=1)
    Path(path).write_bytes(RASTER_MAGIC + struct.pack("<II", T, K) + packed.tobytes())


def read_raster(path):
    blob = Path(path).read_bytes()
    if blob[:4] != RASTER_MAGIC:
        raise DataError(f"{path}: not a raster dump (bad magic)")
    T, K = struct.unpack_from("<II", blob, 4)
    row_bytes = (K + 7) // 8
    if len(blob) != 12 + T * row_bytes:
        raise DataError(f"{path}: raster dump has wrong length")
    packed = np.frombuffer(blob, dtype=np.uint8, offset=12).reshape(T, row_bytes)
    return np.unpackbits(packed, axis=1, count=K)
