"""Synthetic audio for desk-scale training and evaluation.

Two generators:

  - genre clips: two timbre families (low fundamental with bright 1/k
    partials and slow tremolo vs. high fundamental with dark 1/k^2
    partials and fast tremolo), wrapped in per-clip nuisances (gain,
    noise, spectral tilt) so that raw energy statistics are unreliable
    and representation learning has something to do;
  - cover cliques: each clique shares one note sequence, rendered per
    version with its own transposition, tempo, partial balance, and
    noise, like alternative "recordings" of the same underlying piece.

Writers emit 16-bit WAV files plus a CSV (name,label or name,clique).
"""

import csv
import os

import numpy as np

from .dsp import Waveform
from .wav import write_wav

GENRE_LABELS = (0, 1)


def _normalize(x, peak=0.9):
    m = np.abs(x).max()
    if m > peak:
        x = x * (peak / m)
    return x


def _add_noise(x, snr_db, rng):
    power = np.mean(x * x)
    if power <= 0:
        return x
    noise_power = power / (10.0 ** (snr_db / 10.0))
    return x + rng.normal(0.0, np.sqrt(noise_power), size=x.shape)


def _tilt(x, alpha):
    """One-pole spectral tilt: alpha > 0 brightens, < 0 darkens."""
    y = np.empty_like(x)
    y[0] = x[0]
    a = abs(alpha)
    if alpha >= 0:
        y[1:] = x[1:] - a * x[:-1]
    else:
        acc = x[0]
        for i in range(1, x.size):
            acc = (1 - a) * acc + a * x[i]
            y[i] = acc
    return y


def genre_clip(label, rng, sample_rate=8000, n_samples=12000):
    """One labeled clip of the two-timbre toy distribution."""
    t = np.arange(n_samples, dtype=np.float64) / sample_rate
    if label == 0:
        f0 = rng.uniform(140.0, 230.0)
        decay = 1.0
        tremolo_hz = rng.uniform(2.0, 4.0)
    else:
        f0 = rng.uniform(300.0, 450.0)
        decay = 2.0
        tremolo_hz = rng.uniform(5.0, 8.0)
    x = np.zeros(n_samples)
    for k in range(1, 7):
        freq = k * f0
        if freq >= sample_rate / 2:
            break
        x += (1.0 / k ** decay) * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    x *= 1.0 + 0.3 * np.sin(2 * np.pi * tremolo_hz * t + rng.uniform(0, 2 * np.pi))
    x = _tilt(x, rng.uniform(-0.4, 0.4))
    x = _add_noise(x, rng.uniform(10.0, 25.0), rng)
    x *= 10.0 ** (rng.uniform(-10.0, 2.0) / 20.0)
    return Waveform(samples=_normalize(x), sample_rate=sample_rate)


def genre_dataset(n_clips, seed, sample_rate=8000, n_samples=12000):
    """Balanced in-memory dataset: (waveforms, labels)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10,)))
    waveforms, labels = [], []
    for i in range(n_clips):
        label = i % 2
        waveforms.append(genre_clip(label, rng, sample_rate, n_samples))
        labels.append(label)
    return waveforms, np.array(labels, dtype=np.int64)


def _render_notes(notes, sample_rate, n_samples, partial_decay, rng):
    out = np.zeros(n_samples)
    pos = 0
    i = 0
    while pos < n_samples:
        freq, dur = notes[i % len(notes)]
        length = min(int(dur * sample_rate), n_samples - pos)
        t = np.arange(length, dtype=np.float64) / sample_rate
        note = np.zeros(length)
        for k in range(1, 5):
            if k * freq >= sample_rate / 2:
                break
            note += (1.0 / k ** partial_decay) * np.sin(2 * np.pi * k * freq * t
                                                        + rng.uniform(0, 2 * np.pi))
        envelope = np.minimum(1.0, 10.0 * t / max(t[-1], 1e-9)) * np.exp(-2.0 * t / max(t[-1], 1e-9))
        out[pos : pos + length] = note * envelope
        pos += length
        i += 1
    return out


def cover_clip(template_notes, rng, sample_rate=8000, n_samples=12000):
    """One version of a clique: transposed, re-tempoed, re-voiced."""
    transpose = 2.0 ** (rng.integers(-2, 3) / 12.0)
    tempo = rng.uniform(0.8, 1.25)
    notes = [(freq * transpose, dur / tempo) for freq, dur in template_notes]
    x = _render_notes(notes, sample_rate, n_samples, rng.uniform(1.0, 2.0), rng)
    x = _add_noise(x, rng.uniform(15.0, 25.0), rng)
    x *= 10.0 ** (rng.uniform(-6.0, 0.0) / 20.0)
    return Waveform(samples=_normalize(x), sample_rate=sample_rate)


def cover_dataset(n_cliques, versions_per_clique, seed, sample_rate=8000, n_samples=12000):
    """In-memory cover corpus: (waveforms, clique ids)."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(11,)))
    scale = 220.0 * 2.0 ** (np.arange(8) / 8.0)
    waveforms, cliques = [], []
    for c in range(n_cliques):
        n_notes = int(rng.integers(6, 10))
        template = [(float(rng.choice(scale)) * float(rng.choice([1.0, 2.0])),
                     float(rng.uniform(0.15, 0.4))) for _ in range(n_notes)]
        for _ in range(versions_per_clique):
            waveforms.append(cover_clip(template, rng, sample_rate, n_samples))
            cliques.append(c)
    return waveforms, np.array(cliques, dtype=np.int64)


def write_labeled_dataset(out_dir, waveforms, labels, csv_name="labels.csv",
                          label_field="label") -> None:
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for i, (w, label) in enumerate(zip(waveforms, labels)):
        name = f"clip_{i:04d}.wav"
        write_wav(os.path.join(out_dir, name), w.samples, w.sample_rate)
        rows.append((name, int(label)))
    with open(os.path.join(out_dir, csv_name), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("name", label_field))
        writer.writerows(rows)


def read_labels(path, label_field="label"):
    """Read (names, labels) from a dataset CSV."""
    names, labels = [], []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            names.append(row["name"])
            labels.append(int(row[label_field]))
    return names, np.array(labels, dtype=np.int64)
