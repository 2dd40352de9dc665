"""Score-driven positive/negative frame masks.

Frame scores come from cross-branch attention: both branches' last-layer
classification-row queries attend over branch-2's last-layer frame keys,
the two per-head softmax vectors are averaged and summed over heads. The
positive mask drops the k = round(r*L) lowest-scoring frames (clamped to
[1, L-1], ties resolved toward the lower index); the negative mask is the
exact complement. Masks zero whole rows of the raw frame matrix.

Scores are computed from detached caches, so the mask is a stop-gradient
boundary: contrastive losses cannot reach transformer weights through it.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSequenceError, ShapeError


@dataclass(frozen=True)
class FrameScores:
    """Per-frame attention mass; entries are >= 0 and sum to n_heads."""

    s: np.ndarray
    n_heads: int

    @property
    def n_frames(self):
        return int(self.s.shape[0])


@dataclass(frozen=True)
class MaskMatrix:
    """Row keep/drop pattern with the ratio and threshold that built it."""

    keep: np.ndarray  # bool, True = keep
    ratio: float
    threshold: float

    @property
    def n_frames(self):
        return int(self.keep.shape[0])

    @property
    def dropped(self):
        return np.flatnonzero(~self.keep)

    @property
    def kept(self):
        return np.flatnonzero(self.keep)

    @property
    def n_dropped(self):
        return int(np.count_nonzero(~self.keep))


def _softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def frame_scores(cls_q_branch1, cls_q_branch2, keys_branch2):
    """Eq-style attention scores over branch-2 frames.

    Inputs: per-head query vectors (H, D) from each branch and per-head
    key matrices (H, D, L) from branch 2. Output s has length L with
    sum(s) = H: each head contributes the average of two softmax rows.
    """
    q1 = np.asarray(cls_q_branch1, dtype=np.float64)
    q2 = np.asarray(cls_q_branch2, dtype=np.float64)
    keys = np.asarray(keys_branch2, dtype=np.float64)
    if q1.shape != q2.shape:
        raise ShapeError(f"branch query shapes differ: {q1.shape} vs {q2.shape}")
    if q1.ndim != 2 or keys.ndim != 3:
        raise ShapeError(f"expected (H, D) queries and (H, D, L) keys, got {q1.shape}, {keys.shape}")
    h, d = q1.shape
    if keys.shape[0] != h or keys.shape[1] != d:
        raise ShapeError(f"keys shape {keys.shape} does not match queries {q1.shape}")
    scale = 1.0 / np.sqrt(float(d))
    s = np.zeros(keys.shape[2])
    for head in range(h):
        logits1 = (q1[head] @ keys[head]) * scale
        logits2 = (q2[head] @ keys[head]) * scale
        s += 0.5 * (_softmax(logits1) + _softmax(logits2))
    return FrameScores(s=s, n_heads=h)


def drop_count(ratio, n_frames):
    """k = round(ratio * L), half-up, clamped to [1, L-1]."""
    k = int(np.floor(ratio * n_frames + 0.5))
    return min(max(k, 1), n_frames - 1)


def positive_mask(scores, ratio):
    """Drop the k lowest-scoring frames; threshold records the first kept score.

    Ties break toward dropping the lower index. Requires L >= 2 so that
    both the positive and negative view are nonempty.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"mask ratio must be in (0, 1), got {ratio}")
    s = scores.s
    n = scores.n_frames
    if n < 2:
        raise DegenerateSequenceError(
            f"need at least 2 frames to split into positive and negative views, got {n}"
        )
    k = drop_count(ratio, n)
    order = np.argsort(s, kind="stable")
    keep = np.ones(n, dtype=bool)
    keep[order[:k]] = False
    threshold = float(s[order[k]])
    return MaskMatrix(keep=keep, ratio=ratio, threshold=threshold)


def negative_mask(mask):
    """Exact complement: drops precisely what `mask` keeps."""
    return MaskMatrix(keep=~mask.keep, ratio=mask.ratio, threshold=mask.threshold)


def apply_mask(frames, mask):
    """Zero the dropped rows of a frame matrix; kept rows pass unchanged."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ShapeError(f"expected a 2-D frame matrix, got shape {frames.shape}")
    if frames.shape[0] != mask.n_frames:
        raise ShapeError(
            f"frame count {frames.shape[0]} does not match mask length {mask.n_frames}"
        )
    return frames * mask.keep[:, None]
