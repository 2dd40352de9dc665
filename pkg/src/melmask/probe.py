"""Frozen-encoder probes.

Embeddings are 512-dim encoder outputs (projection head excluded), taken
in evaluation mode. The probe is a linear layer (or, with `hidden`, a
one-hidden-layer MLP) trained with full-batch Adam on logistic losses:
per-tag sigmoid for multi-label targets, softmax for single-label class
ids. The encoder is never touched: probes consume plain arrays.
"""

import numpy as np

from . import autodiff as ad
from .dsp import log_mel
from .errors import DegenerateLabelsError
from .optim import Adam
from .params import Parameter, glorot_uniform


def embed_waveform(encoder, spec_cfg, waveform, seg_len=None):
    """One waveform -> one 512-dim representation (eval mode).

    With `seg_len`, the center segment of that length is used; otherwise
    the full clip.
    """
    w = waveform
    if seg_len is not None and len(w.samples) > seg_len:
        start = (len(w.samples) - seg_len) // 2
        from .dsp import Waveform

        w = Waveform(samples=w.samples[start : start + seg_len], sample_rate=w.sample_rate)
    frames = log_mel(w, spec_cfg).frames
    return encoder.encode_frames(frames)


def embed_waveforms(encoder, spec_cfg, waveforms, seg_len=None):
    return np.stack([embed_waveform(encoder, spec_cfg, w, seg_len) for w in waveforms])


def _check_labels(labels, multilabel):
    labels = np.asarray(labels)
    if multilabel:
        if labels.ndim != 2:
            raise DegenerateLabelsError(
                f"multi-label targets must be (N, T), got shape {labels.shape}"
            )
        has_both = [(np.count_nonzero(labels[:, t] == 1) > 0
                     and np.count_nonzero(labels[:, t] == 0) > 0)
                    for t in range(labels.shape[1])]
        if not any(has_both):
            raise DegenerateLabelsError("every tag column is constant; nothing to learn")
    else:
        if labels.ndim != 1:
            raise DegenerateLabelsError(
                f"single-label targets must be a class-id vector, got shape {labels.shape}"
            )
        if np.unique(labels).size < 2:
            raise DegenerateLabelsError("need at least 2 classes to train a probe")
    return labels


class Probe:
    """Linear or one-hidden-layer classifier over fixed embeddings."""

    def __init__(self, in_dim, n_out, *, multilabel, hidden=0, rng=None):
        rng = np.random.default_rng(0) if rng is None else rng
        self.multilabel = multilabel
        self.hidden = hidden
        params = []
        if hidden > 0:
            self.w1 = Parameter("probe.w1", glorot_uniform(rng, (in_dim, hidden), in_dim, hidden))
            self.b1 = Parameter("probe.b1", np.zeros(hidden))
            self.w2 = Parameter("probe.w2", glorot_uniform(rng, (hidden, n_out), hidden, n_out))
            self.b2 = Parameter("probe.b2", np.zeros(n_out))
            params = [self.w1, self.b1, self.w2, self.b2]
        else:
            self.w = Parameter("probe.w", glorot_uniform(rng, (in_dim, n_out), in_dim, n_out))
            self.b = Parameter("probe.b", np.zeros(n_out))
            params = [self.w, self.b]
        self.params = params

    def logits(self, x):
        x = ad.as_tensor(x)
        if self.hidden > 0:
            h = ad.relu(ad.add(ad.matmul(x, self.w1.node),
                               ad.reshape(self.b1.node, (1, self.hidden))))
            return ad.add(ad.matmul(h, self.w2.node),
                          ad.reshape(self.b2.node, (1, self.b2.data.shape[0])))
        return ad.add(ad.matmul(x, self.w.node), ad.reshape(self.b.node, (1, self.b.data.shape[0])))

    def scores(self, x):
        """Plain-array decision scores (logits) for metric computation."""
        return self.logits(np.asarray(x, dtype=np.float64)).data.copy()

    def predict(self, x):
        s = self.scores(x)
        if self.multilabel:
            return (s > 0).astype(np.int64)
        return np.argmax(s, axis=1)


def train_probe(embeddings, labels, *, multilabel, hidden=0, epochs=200,
                lr=1e-3, seed=0):
    """Full-batch probe training; returns the fitted Probe."""
    x = np.asarray(embeddings, dtype=np.float64)
    labels = _check_labels(labels, multilabel)
    if multilabel:
        n_out = labels.shape[1]
        targets = labels.astype(np.float64)
    else:
        n_out = int(labels.max()) + 1
        targets = np.eye(n_out)[labels.astype(np.int64)]
    probe = Probe(x.shape[1], n_out, multilabel=multilabel, hidden=hidden,
                  rng=np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,))))
    opt = Adam(probe.params, lr=lr)
    for _ in range(epochs):
        z = probe.logits(x)
        if multilabel:
            loss = ad.mean(ad.bce_with_logits(z, targets))
        else:
            loss = ad.mean(ad.softmax_cross_entropy(z, targets))
        loss.backward()
        opt.step()
    return probe
