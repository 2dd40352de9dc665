"""Waveform-to-spectrogram pipeline.

Transforms raw mono audio into log-scaled mel spectrogram frame matrices:
random segment pairs, short-time Fourier analysis, triangular mel filtering,
and log compression. Everything here is a pure function of (input, config,
rng) so it can run from worker threads.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFilterbankError, InsufficientAudioError

LOG_FLOOR = 1e-6


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples (nominally in [-1, 1]) plus their sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class FilterBank:
    """Triangular mel filters: (n_mels, n_bins) non-negative weights."""

    weights: np.ndarray
    n_mels: int
    n_bins: int


@dataclass(frozen=True)
class FrameMatrix:
    """L x D matrix of log-mel frames; one row per time step."""

    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"frames must be a non-empty 2-D matrix, got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValueError("frames contain non-finite entries")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_bins(self):
        return self.frames.shape[1]


@dataclass(frozen=True)
class SpectrogramConfig:
    sample_rate: int = 16000
    n_fft: int = 256
    hop: int = 128
    n_mels: int = 128
    log_floor: float = LOG_FLOOR


def sample_two_segments(w: Waveform, seg_len: int, rng: np.random.Generator):
    """Cut two segments of seg_len samples from one waveform.

    Offsets are drawn independently and uniformly over the valid range, so
    the segments may overlap or even coincide.
    """
    n = len(w)
    if seg_len < 1:
        raise ValueError(f"seg_len must be positive, got {seg_len}")
    if n < seg_len:
        raise InsufficientAudioError(f"waveform has {n} samples, need at least {seg_len}")
    hi = n - seg_len
    a = int(rng.integers(0, hi + 1))
    b = int(rng.integers(0, hi + 1))
    return (
        Waveform(w.samples[a : a + seg_len].copy(), w.sample_rate),
        Waveform(w.samples[b : b + seg_len].copy(), w.sample_rate),
    )


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(w: Waveform, n_fft: int = 256, hop: int = 128, window=hann_window) -> np.ndarray:
    """Short-time Fourier transform, one row per frame.

    Frame l covers samples [l*hop, l*hop + n_fft); only the n_fft//2 + 1
    non-redundant bins are kept. No padding is applied, so
    L = 1 + (len - n_fft) // hop.
    """
    x = w.samples
    if len(x) < n_fft:
        raise InsufficientAudioError(f"waveform has {len(x)} samples, need at least n_fft={n_fft}")
    win = window(n_fft) if callable(window) else np.asarray(window, dtype=np.float64)
    if win.shape != (n_fft,):
        raise ValueError(f"window length {win.shape} does not match n_fft={n_fft}")
    n_frames = 1 + (len(x) - n_fft) // hop
    shape = (n_frames, n_fft)
    strides = (hop * x.strides[0], x.strides[0])
    frames = np.lib.stride_tricks.as_strided(x, shape=shape, strides=strides)
    return np.fft.rfft(frames * win, n=n_fft, axis=1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (np.power(10.0, np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = 128, n_fft: int = 256, sample_rate: int = 16000) -> FilterBank:
    """Triangular filters with centers uniformly spaced on the mel scale.

    Each unit-height triangle is integrated over every FFT bin's frequency
    interval (width sample_rate/n_fft) rather than point-sampled at bin
    centers; this keeps every band non-empty even when triangles are
    narrower than a bin, which already happens at 128 bands on a 256-point
    FFT.
    """
    if n_mels < 1:
        raise ValueError(f"n_mels must be >= 1, got {n_mels}")
    if n_fft < 2:
        raise ValueError(f"n_fft must be >= 2, got {n_fft}")
    n_bins = n_fft // 2 + 1
    if n_mels > 4 * n_bins:
        raise DegenerateFilterbankError(
            f"{n_mels} mel bands exceed the distinct centers representable on a "
            f"{n_bins}-bin grid (limit {4 * n_bins})"
        )
    nyquist = sample_rate / 2.0
    mel_points = np.linspace(0.0, float(hz_to_mel(nyquist)), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    if np.any(np.diff(hz_points) <= 0.0):
        raise DegenerateFilterbankError(
            f"adjacent band edges collapse at {n_mels} bands on a {n_bins}-bin grid"
        )

    bin_width = sample_rate / n_fft
    # Bin k integrates over [k*w - w/2, k*w + w/2] clipped to [0, nyquist].
    lo_edges = np.maximum(np.arange(n_bins) * bin_width - bin_width / 2.0, 0.0)
    hi_edges = np.minimum(np.arange(n_bins) * bin_width + bin_width / 2.0, nyquist)

    weights = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        left, center, right = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rise = _triangle_segment_integral(lo_edges, hi_edges, left, center, rising=True)
        fall = _triangle_segment_integral(lo_edges, hi_edges, center, right, rising=False)
        weights[m] = (rise + fall) / bin_width
    return FilterBank(weights=weights, n_mels=n_mels, n_bins=n_bins)


def _triangle_segment_integral(lo, hi, a, b, rising):
    """Integral over [lo, hi] of the linear ramp defined on [a, b].

    The ramp goes 0 -> 1 when rising, 1 -> 0 otherwise. Vectorized over
    (lo, hi) interval arrays.
    """
    lo_c = np.clip(lo, a, b)
    hi_c = np.clip(hi, a, b)
    span = b - a
    if span <= 0:
        return np.zeros_like(lo)
    if rising:
        # antiderivative of (f - a)/span is (f - a)^2 / (2 span)
        return ((hi_c - a) ** 2 - (lo_c - a) ** 2) / (2.0 * span)
    return ((b - lo_c) ** 2 - (b - hi_c) ** 2) / (2.0 * span)


def log_mel(w: Waveform, cfg: SpectrogramConfig) -> FrameMatrix:
    """Log-scaled mel power spectrogram: ln(mel_energy + floor) per bin."""
    spec = stft(w, n_fft=cfg.n_fft, hop=cfg.hop)
    power = np.abs(spec) ** 2
    bank = mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate)
    mel_energy = power @ bank.weights.T
    return FrameMatrix(np.log(mel_energy + cfg.log_floor))
