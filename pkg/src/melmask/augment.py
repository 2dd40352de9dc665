"""Waveform augmentation chain.

Six transforms applied independently, each with its own probability, in a
fixed order: polarity inversion, noise, gain, filter, delay, pitch shift.
Random draws happen in that order, and a transform's parameters are drawn
only when it fires, so a given (config, seed) pair is reproducible.

Output length always equals input length.
"""

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .dsp import Waveform


@dataclass(frozen=True)
class AugmentationConfig:
    polarity_prob: float = 0.5
    noise_prob: float = 0.3
    noise_snr_db: tuple = (20.0, 40.0)
    gain_prob: float = 0.5
    gain_db: tuple = (-6.0, 0.0)
    filter_prob: float = 0.3
    lowpass_hz: tuple = (2200.0, 4000.0)
    highpass_hz: tuple = (200.0, 1200.0)
    delay_prob: float = 0.3
    delay_ms: tuple = (200, 500)
    delay_attenuation: float = 0.5
    pitch_prob: float = 0.3
    pitch_semitones: tuple = (-5, 5)

    def __post_init__(self):
        for name in ("polarity_prob", "noise_prob", "gain_prob", "filter_prob", "delay_prob", "pitch_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        for name in ("noise_snr_db", "gain_db", "lowpass_hz", "highpass_hz", "delay_ms", "pitch_semitones"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range has lower > upper: ({lo}, {hi})")


def no_augmentation() -> AugmentationConfig:
    """Config under which augment() is exactly the identity."""
    return AugmentationConfig(
        polarity_prob=0.0, noise_prob=0.0, gain_prob=0.0,
        filter_prob=0.0, delay_prob=0.0, pitch_prob=0.0,
    )


def polarity_inversion(x: np.ndarray) -> np.ndarray:
    return -x


def add_noise(x: np.ndarray, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Add white gaussian noise at the given signal-to-noise ratio.

    Silence has no defined SNR, so all-zero input is returned unchanged.
    """
    power = float(np.mean(x**2))
    if power == 0.0:
        return x.copy()
    noise_power = power / (10.0 ** (snr_db / 10.0))
    return x + rng.standard_normal(x.size) * np.sqrt(noise_power)


def apply_gain(x: np.ndarray, db: float) -> np.ndarray:
    return x * (10.0 ** (db / 20.0))


def first_order_filter(x: np.ndarray, sample_rate: int, cutoff_hz: float, kind: str) -> np.ndarray:
    """Single-pole IIR low-pass, or its complement as the high-pass."""
    alpha = 1.0 - np.exp(-2.0 * np.pi * cutoff_hz / sample_rate)
    low = sps.lfilter([alpha], [1.0, alpha - 1.0], x)
    if kind == "lowpass":
        return low
    if kind == "highpass":
        return x - low
    raise ValueError(f"unknown filter kind {kind!r}")


def add_delay(x: np.ndarray, sample_rate: int, delay_ms: int, attenuation: float) -> np.ndarray:
    """Mix in an attenuated delayed copy, rescaling only if the sum clips."""
    d = int(round(delay_ms * sample_rate / 1000.0))
    out = x.copy()
    if 0 < d < x.size:
        out[d:] += attenuation * x[:-d]
    elif d == 0:
        out += attenuation * x
    peak = float(np.max(np.abs(out))) if out.size else 0.0
    if peak > 1.0:
        out /= peak
    return out


def pitch_shift(x: np.ndarray, semitones: int) -> np.ndarray:
    """Shift pitch by resampling, then crop or zero-pad back to length.

    A crude rate-change shift: it alters duration-per-sample rather than
    preserving formants, but it is deterministic and cheap.
    """
    if semitones == 0:
        return x.copy()
    factor = 2.0 ** (semitones / 12.0)
    new_len = max(1, int(round(x.size / factor)))
    resampled = sps.resample(x, new_len)
    if new_len >= x.size:
        return resampled[: x.size]
    out = np.zeros(x.size)
    out[:new_len] = resampled
    return out


def augment(w: Waveform, cfg: AugmentationConfig, rng: np.random.Generator) -> Waveform:
    """Apply the six-transform chain to a waveform."""
    x = w.samples.copy()
    sr = w.sample_rate

    if rng.random() < cfg.polarity_prob:
        x = polarity_inversion(x)
    if rng.random() < cfg.noise_prob:
        snr = rng.uniform(*cfg.noise_snr_db)
        x = add_noise(x, snr, rng)
    if rng.random() < cfg.gain_prob:
        db = rng.uniform(*cfg.gain_db)
        x = apply_gain(x, db)
    if rng.random() < cfg.filter_prob:
        if rng.random() < 0.5:
            cutoff = rng.uniform(*cfg.lowpass_hz)
            x = first_order_filter(x, sr, cutoff, "lowpass")
        else:
            cutoff = rng.uniform(*cfg.highpass_hz)
            x = first_order_filter(x, sr, cutoff, "highpass")
    if rng.random() < cfg.delay_prob:
        ms = int(rng.integers(cfg.delay_ms[0], cfg.delay_ms[1] + 1))
        x = add_delay(x, sr, ms, cfg.delay_attenuation)
    if rng.random() < cfg.pitch_prob:
        steps = int(rng.integers(cfg.pitch_semitones[0], cfg.pitch_semitones[1] + 1))
        x = pitch_shift(x, steps)

    return Waveform(x, sr)
