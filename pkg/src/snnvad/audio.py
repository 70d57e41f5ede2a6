"""Log-Mel feature extraction for 16 kHz mono audio.

Frames are 1024 samples (64 ms) with a 256 sample hop (16 ms). Each frame is
Hann-windowed, transformed with a 1024-point real FFT, and its power spectrum
is projected onto 128 triangular Mel filters spanning 0-8000 Hz.
"""
from __future__ import annotations

import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioFormatError, DataError, ValidationError

SAMPLE_RATE = 16000
WINDOW = 1024
HOP = 256
N_MELS = 128
N_FFT = 1024
LOG_FLOOR = 1e-10

FEATURE_MAGIC = b"SVFE"
FEATURE_VERSION = 1


@dataclass(frozen=True)
class AudioSignal:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate != SAMPLE_RATE:
            raise AudioFormatError(
                f"sample rate {self.sample_rate} Hz not supported, expected {SAMPLE_RATE} Hz"
            )
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))


@dataclass(frozen=True)
class Normalizer:
    """Global min/max scaling fitted on the training set."""

    min_value: float
    max_value: float

    def __post_init__(self):
        if not self.max_value > self.min_value:
            raise DataError(
                f"degenerate normalizer statistics: min={self.min_value}, max={self.max_value}"
            )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filter_edges(n_mels=N_MELS, fmin=0.0, fmax=SAMPLE_RATE / 2):
    """Return the ``n_mels + 2`` filter edge frequencies in Hz, equally spaced in mel."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def mel_filterbank(n_mels=N_MELS, n_fft=N_FFT, sample_rate=SAMPLE_RATE):
    """Triangular filter matrix of shape (n_mels, n_fft // 2 + 1), peak value 1, no area normalization."""
    edges = mel_filter_edges(n_mels, 0.0, sample_rate / 2)
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (center - lo)
    falling = (hi - freqs[None, :]) / (hi - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def hann_window(n=WINDOW):
    """Periodic Hann window."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


_FILTERBANK = mel_filterbank()
_HANN = hann_window()


def frame_signal(signal):
    """Split a signal into overlapping 1024-sample windows, hop 256.

    Accepts an :class:`AudioSignal` or a bare sample array (assumed 16 kHz).
    Returns an array of shape ``(n_windows, 1024)``.
    """
    samples = signal.samples if isinstance(signal, AudioSignal) else np.asarray(signal, dtype=np.float64)
    if samples.ndim != 1:
        raise ValidationError("expected a 1-D sample array")
    if samples.shape[0] < WINDOW:
        raise DataError(f"signal of {samples.shape[0]} samples is shorter than one {WINDOW}-sample window")
    view = np.lib.stride_tricks.sliding_window_view(samples, WINDOW)[::HOP]
    return np.ascontiguousarray(view)


def log_mel_spectrum(window):
    """128 natural-log Mel energies for one window or a stack of windows (last axis = 1024)."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape[-1] != WINDOW:
        raise ValidationError(f"window length must be {WINDOW}, got {window.shape[-1]}")
    spectrum = np.fft.rfft(window * _HANN, n=N_FFT, axis=-1)
    power = spectrum.real ** 2 + spectrum.imag ** 2
    energies = power @ _FILTERBANK.T
    return np.log(np.maximum(energies, LOG_FLOOR))


def extract_features(signal):
    """Feature matrix of shape ``(n_frames, 128)`` for a whole signal."""
    return log_mel_spectrum(frame_signal(signal))


def fit_normalizer(frames):
    """Global minimum and maximum over every coefficient of every frame.

    ``frames`` may be one array or an iterable of arrays (e.g. one per file);
    the reduction is done per chunk, so large corpora need not be concatenated.
    """
    if isinstance(frames, np.ndarray):
        frames = [frames]
    lo, hi, seen = np.inf, -np.inf, False
    for chunk in frames:
        chunk = np.asarray(chunk, dtype=np.float64)
        if chunk.size == 0:
            continue
        seen = True
        lo = min(lo, float(chunk.min()))
        hi = max(hi, float(chunk.max()))
    if not seen:
        raise DataError("cannot fit a normalizer on zero frames")
    return Normalizer(lo, hi)


def normalize(frame, norm, clip=False):
    out = (np.asarray(frame, dtype=np.float64) - norm.min_value) / (norm.max_value - norm.min_value)
    if clip:
        return np.clip(out, 0.0, 1.0)
    if out.size and (out.min() < 0.0 or out.max() > 1.0):
        raise DataError(
            "normalized features fall outside [0, 1]; use clip=True for data not seen during fitting"
        )
    return out


# --- WAV and feature-file I/O ----------------------------------------------


def read_wav(path):
    """Read a mono 16-bit PCM 16 kHz WAV file into an :class:`AudioSignal` scaled to [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError, struct.error) as exc:
        raise AudioFormatError(f"{path}: not a readable PCM WAV file ({exc})") from exc
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: sample rate {rate} Hz, expected {SAMPLE_RATE} Hz")
    if channels != 1:
        raise AudioFormatError(f"{path}: {channels} channels, expected mono")
    if width != 2:
        raise AudioFormatError(f"{path}: {8 * width}-bit samples, expected 16-bit PCM")
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioSignal(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path, samples, sample_rate=SAMPLE_RATE):
    samples = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())


def write_features(path, features):
    features = np.asarray(features, dtype="<f4")
    if features.ndim != 2 or features.shape[1] != N_MELS:
        raise ValidationError(f"feature matrix must be (n_frames, {N_MELS}), got {features.shape}")
    header = FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, features.shape[0], features.shape[1])
    Path(path).write_bytes(header + np.ascontiguousarray(features).tobytes())


def read_features(path):
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:4] != FEATURE_MAGIC:
        raise DataError(f"{path}: not a feature file (bad magic)")
    version, n_frames, n_coeffs = struct.unpack_from("<III", blob, 4)
    if version != FEATURE_VERSION:
        raise DataError(f"{path}: unsupported feature file version {version}")
    expected = 16 + 4 * n_frames * n_coeffs
    if len(blob) != expected:
        raise DataError(f"{path}: truncated feature file ({len(blob)} bytes, expected {expected})")
    return np.frombuffer(blob, dtype="<f4", offset=16).reshape(n_frames, n_coeffs).astype(np.float64)
