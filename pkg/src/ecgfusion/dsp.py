"""STFT front end: windowing, framing, band selection and normalisation."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BandTooWide, EmptySignal, InvalidLevel, LengthMismatch

CANONICAL_RATE = 512
BASE_LEN = 512


class WindowKind(str, Enum):
    HAMMING = "hamming"
    RECTANGULAR = "rectangular"


@dataclass(frozen=True)
class WindowFn:
    kind: WindowKind = WindowKind.HAMMING
    length: int = 256

    def __post_init__(self):
        object.__setattr__(self, "kind", WindowKind(self.kind))
        if self.length < 1:
            raise ValueError(f"window length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class StftConfig:
    window: WindowFn = field(default_factory=WindowFn)
    hop: int = 128
    band_bins: int = 32

    def __post_init__(self):
        if not 1 <= self.hop <= self.window.length:
            raise ValueError(f"hop must be in 1..{self.window.length}, got {self.hop}")
        if not 1 <= self.band_bins <= self.num_bins:
            raise BandTooWide(f"band_bins={self.band_bins} exceeds the {self.num_bins} one-sided bins")

    @property
    def num_bins(self) -> int:
        return self.window.length // 2 + 1


@dataclass
class Spectrogram:
    values: np.ndarray  # (band_bins, frames), or batched (..., band_bins, frames)
    freq_resolution_hz: float
    hop_samples: int


def window_weights(w: WindowFn) -> np.ndarray:
    n = w.length
    if w.kind is WindowKind.RECTANGULAR or n == 1:
        return np.ones(n)
    i = np.arange(n)
    return 0.54 - 0.46 * np.cos(2 * np.pi * i / (n - 1))


def num_frames(length: int, hop: int) -> int:
    return -(-length // hop)


def stft(signal, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """One-sided STFT, ``(bins, frames)`` complex; leading batch axes allowed.

    The tail is zero-padded so there are ``ceil(len / hop)`` frames.  Phases
    are referenced to the start of the signal (``exp(-2j*pi*k*n/L)`` with
    absolute sample index ``n``), not to the start of each frame.
    """
    x = np.asarray(signal, dtype=float)
    n = x.shape[-1] if x.ndim else 0
    if n == 0:
        raise EmptySignal("cannot transform an empty signal")
    L, hop = cfg.window.length, cfg.hop
    frames = num_frames(n, hop)
    padded_len = frames * hop + (L - hop)
    pad = [(0, 0)] * (x.ndim - 1) + [(0, padded_len - n)]
    xp = np.pad(x, pad)
    win = np.lib.stride_tricks.sliding_window_view(xp, L, axis=-1)[..., ::hop, :][..., :frames, :]
    spec = np.fft.rfft(win * window_weights(cfg.window), axis=-1)  # (..., frames, bins)
    k = np.arange(cfg.num_bins)
    starts = np.arange(frames) * hop
    spec = spec * np.exp(-2j * np.pi * np.outer(starts, k) / L)
    return np.swapaxes(spec, -1, -2)


def spectrogram(stft_out, cfg: StftConfig = StftConfig(), sample_rate: int = CANONICAL_RATE) -> Spectrogram:
    """Keep the lowest ``band_bins`` rows, map to ``log(1 + |z|)``, standardise.

    Each grid (the last two axes) is standardised on its own to zero mean
    and unit population variance; a constant grid becomes all zeros.
    """
    z = np.asarray(stft_out)
    if z.ndim < 2:
        raise ValueError("stft_out must have at least two axes (bins, frames)")
    if z.shape[-2] < cfg.band_bins:
        raise BandTooWide(f"band_bins={cfg.band_bins} but only {z.shape[-2]} bins available")
    mag = np.log1p(np.abs(z[..., : cfg.band_bins, :]))
    mean = mag.mean(axis=(-2, -1), keepdims=True)
    std = mag.std(axis=(-2, -1), keepdims=True)
    flat = np.ptp(mag.reshape(mag.shape[:-2] + (-1,)), axis=-1)[..., None, None] == 0
    safe = np.where(flat, 1.0, std)
    values = np.where(flat, 0.0, (mag - mean) / safe)
    return Spectrogram(values, sample_rate / cfg.window.length, cfg.hop)


def level_length(level: int, base_len: int = BASE_LEN) -> int:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or not 1 <= level <= 6:
        raise InvalidLevel(f"level must be an integer in 1..6, got {level!r}")
    return base_len * 2 ** (int(level) - 1)


def preprocess_batch(samples, level: int, cfg: StftConfig = StftConfig(), dtype=np.float32) -> np.ndarray:
    """``(n, len)`` raw segments to an ``(n, 1, band_bins, frames)`` model batch."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[None]
    need = level_length(level)
    if x.shape[-1] != need:
        raise LengthMismatch(f"level {level} needs {need} samples, got {x.shape[-1]}")
    values = spectrogram(stft(x, cfg), cfg).values
    return values[:, None].astype(dtype)


def preprocess(record, level: int, cfg: StftConfig = StftConfig(), dtype=np.float32) -> np.ndarray:
    """Model input ``(1, band_bins, 4 * 2**(level-1))`` for one record or sample vector."""
    samples = getattr(record, "samples", record)
    rate = getattr(record, "sample_rate_hz", CANONICAL_RATE)
    if rate != CANONICAL_RATE:
        raise LengthMismatch(f"records must be sampled at {CANONICAL_RATE} Hz, got {rate}")
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise LengthMismatch(f"expected a 1-D sample vector, got shape {x.shape}")
    return preprocess_batch(x[None], level, cfg, dtype)[0]


def expected_frames(level: int, cfg: StftConfig = StftConfig()) -> int:
    return num_frames(level_length(level), cfg.hop)


__all__ = [
    "WindowKind", "WindowFn", "StftConfig", "Spectrogram", "window_weights", "stft",
    "spectrogram", "preprocess", "preprocess_batch", "level_length", "num_frames",
    "expected_frames", "CANONICAL_RATE", "BASE_LEN",
]
