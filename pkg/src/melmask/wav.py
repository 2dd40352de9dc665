"""Mono 16-bit PCM WAV reading and writing."""

import wave

import numpy as np

from .errors import WavFormatError


def read_wav(path):
    """Load a mono 16-bit PCM WAV file.

    Returns (samples, sample_rate) with samples as float64 in [-1, 1).
    Multi-channel or non-16-bit files are rejected.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            comp = wf.getcomptype()
            rate = wf.getframerate()
            n = wf.getnframes()
            raw = wf.readframes(n)
    except (wave.Error, EOFError) as exc:
        # The stdlib reader signals truncation with a bare EOFError.
        raise WavFormatError(f"{path}: {exc or 'truncated file'}") from exc
    except OSError as exc:
        raise WavFormatError(f"{path}: cannot read file: {exc}") from exc
    if comp != "NONE":
        raise WavFormatError(f"{path}: compressed WAV ({comp}) not supported")
    if channels != 1:
        raise WavFormatError(f"{path}: expected mono, got {channels} channels")
    if width != 2:
        raise WavFormatError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples, sample_rate) -> None:
    """Write float samples (clipped to [-1, 1]) as mono 16-bit PCM."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.round(clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())
