"""Transformer encoder over log-mel frame sequences.

A learnable classification row is prepended to the L frames, sinusoidal
positions are added, and the sequence runs through post-norm encoder
layers (attention sublayer, then feed-forward, each with residual + layer
normalization). Every head projects with full DxD matrices, so the head
concatenation is H*D wide before the output projection.

Random frame masking disturbs the input for the reconstruction objective:
each frame is independently selected with probability 0.15 (at least one
is always selected); a selected frame is replaced by the learned mask
embedding (80%), by a random other frame of the same sequence (10%), or
kept (10%). The original rows are recorded so the prediction head can be
scored against them.

`encode` additionally caches the per-layer, per-head query and key
matrices as plain arrays; the last layer's classification-row query and
frame keys feed the mask generator. The caches are detached: no gradient
flows through them.
"""

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import ShapeError
from .params import Parameter, glorot_uniform, normal_init

SELECT_PROB = 0.15
ACTION_EMBED = 0
ACTION_RANDOM = 1
ACTION_KEEP = 2
_LN_EPS = 1e-5


@dataclass(frozen=True)
class TransformerConfig:
    model_dim: int = 128
    n_layers: int = 3
    n_heads: int = 3
    ffn_hidden: int = 0  # 0 means "equal to model_dim"

    def __post_init__(self):
        if self.model_dim < 1 or self.n_layers < 1 or self.n_heads < 1:
            raise ValueError(
                f"invalid transformer config: dim={self.model_dim}, "
                f"layers={self.n_layers}, heads={self.n_heads}"
            )

    @property
    def hidden(self):
        return self.ffn_hidden if self.ffn_hidden > 0 else self.model_dim


@dataclass
class MaskRecord:
    """Which frames were disturbed, how, and what they originally held.

    `frame_indices` are 0-based rows of the frame matrix; `token_indices`
    shifts by one past the classification row.
    """

    frame_indices: np.ndarray
    actions: np.ndarray
    originals: np.ndarray
    replacements: np.ndarray
    n_frames: int

    @property
    def token_indices(self):
        return self.frame_indices + 1

    def __len__(self):
        return int(self.frame_indices.size)


@dataclass
class LayerWeights:
    wq: list
    wk: list
    wv: list
    w_out: Parameter
    b_out: Parameter
    ln1_gamma: Parameter
    ln1_beta: Parameter
    ffn_w1: Parameter
    ffn_b1: Parameter
    ffn_w2: Parameter
    ffn_b2: Parameter
    ln2_gamma: Parameter
    ln2_beta: Parameter

    def parameters(self):
        return [*self.wq, *self.wk, *self.wv, self.w_out, self.b_out,
                self.ln1_gamma, self.ln1_beta, self.ffn_w1, self.ffn_b1,
                self.ffn_w2, self.ffn_b2, self.ln2_gamma, self.ln2_beta]


@dataclass
class EncodeCache:
    """Detached per-layer, per-head query/key matrices, each (L+1, D)."""

    queries: list = field(default_factory=list)
    keys: list = field(default_factory=list)

    def cls_queries(self):
        """Last-layer query vector of the classification row, per head: (H, D)."""
        return np.stack([q[0] for q in self.queries[-1]])

    def frame_keys(self):
        """Last-layer key matrix of the frames, per head: (H, D, L)."""
        return np.stack([k[1:].T for k in self.keys[-1]])


def sinusoidal_positions(n_positions, dim):
    """Alternating sin/cos positional table, shape (n_positions, dim)."""
    if n_positions < 1 or dim < 1:
        raise ShapeError(f"invalid positional table shape ({n_positions}, {dim})")
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    idx = np.arange(dim, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * np.floor(idx / 2.0) / dim)
    table = np.where(idx % 2 == 0, np.sin(angles), np.cos(angles))
    return table


def layer_norm(x, gamma, beta, eps=_LN_EPS):
    """Per-row normalization over the feature axis of a 2-D tensor."""
    mu = ad.mean(x, axis=1, keepdims=True)
    centered = ad.sub(x, mu)
    var = ad.mean(ad.square(centered), axis=1, keepdims=True)
    normed = ad.div(centered, ad.sqrt(ad.add(var, eps)))
    d = gamma.data.shape[0]
    return ad.add(ad.mul(normed, ad.reshape(gamma, (1, d))), ad.reshape(beta, (1, d)))


def multi_head_attention(x, layer, model_dim):
    """One attention sublayer. Returns (output, per-head Q, per-head K).

    Per head: softmax(Q K^T / sqrt(D)) V with full DxD projections; head
    outputs are concatenated (H*D wide) and projected back to D.
    """
    x = ad.as_tensor(x)
    scale = 1.0 / np.sqrt(float(model_dim))
    heads, qs, ks = [], [], []
    for wq, wk, wv in zip(layer.wq, layer.wk, layer.wv):
        q = ad.matmul(x, wq.node)
        k = ad.matmul(x, wk.node)
        v = ad.matmul(x, wv.node)
        scores = ad.mul(ad.matmul(q, ad.transpose(k)), scale)
        attn = ad.softmax(scores, axis=1)
        heads.append(ad.matmul(attn, v))
        qs.append(q)
        ks.append(k)
    concat = heads[0] if len(heads) == 1 else ad.concat(heads, axis=1)
    out_dim = layer.b_out.data.shape[0]
    y = ad.add(ad.matmul(concat, layer.w_out.node),
               ad.reshape(layer.b_out.node, (1, out_dim)))
    return y, qs, ks


def ffn(y, layer):
    """Position-wise feed-forward: ReLU(y W1 + b1) W2 + b2."""
    y = ad.as_tensor(y)
    h_dim = layer.ffn_b1.data.shape[0]
    out_dim = layer.ffn_b2.data.shape[0]
    hidden = ad.relu(ad.add(ad.matmul(y, layer.ffn_w1.node),
                            ad.reshape(layer.ffn_b1.node, (1, h_dim))))
    return ad.add(ad.matmul(hidden, layer.ffn_w2.node),
                  ad.reshape(layer.ffn_b2.node, (1, out_dim)))


class TransformerEncoder:
    """Stack of post-norm encoder layers plus the masking machinery."""

    def __init__(self, config, rng):
        self.config = config
        d = config.model_dim
        dh = config.hidden
        self.cls = Parameter("transformer.cls", normal_init(rng, (d,)))
        self.mask_embedding = Parameter("transformer.mask_embedding", normal_init(rng, (d,)))
        self.layers = []
        for n in range(config.n_layers):
            pre = f"transformer.layer{n}"
            wq = [Parameter(f"{pre}.head{h}.wq", glorot_uniform(rng, (d, d), d, d))
                  for h in range(config.n_heads)]
            wk = [Parameter(f"{pre}.head{h}.wk", glorot_uniform(rng, (d, d), d, d))
                  for h in range(config.n_heads)]
            wv = [Parameter(f"{pre}.head{h}.wv", glorot_uniform(rng, (d, d), d, d))
                  for h in range(config.n_heads)]
            hd = config.n_heads * d
            self.layers.append(LayerWeights(
                wq=wq, wk=wk, wv=wv,
                w_out=Parameter(f"{pre}.w_out", glorot_uniform(rng, (hd, d), hd, d)),
                b_out=Parameter(f"{pre}.b_out", np.zeros(d)),
                ln1_gamma=Parameter(f"{pre}.ln1.gamma", np.ones(d)),
                ln1_beta=Parameter(f"{pre}.ln1.beta", np.zeros(d)),
                ffn_w1=Parameter(f"{pre}.ffn.w1", glorot_uniform(rng, (d, dh), d, dh)),
                ffn_b1=Parameter(f"{pre}.ffn.b1", np.zeros(dh)),
                ffn_w2=Parameter(f"{pre}.ffn.w2", glorot_uniform(rng, (dh, d), dh, d)),
                ffn_b2=Parameter(f"{pre}.ffn.b2", np.zeros(d)),
                ln2_gamma=Parameter(f"{pre}.ln2.gamma", np.ones(d)),
                ln2_beta=Parameter(f"{pre}.ln2.beta", np.zeros(d)),
            ))
        self.head_w1 = Parameter("transformer.pred_head.w1", glorot_uniform(rng, (d, d), d, d))
        self.head_b1 = Parameter("transformer.pred_head.b1", np.zeros(d))
        self.head_w2 = Parameter("transformer.pred_head.w2", glorot_uniform(rng, (d, d), d, d))
        self.head_b2 = Parameter("transformer.pred_head.b2", np.zeros(d))

    def parameters(self):
        out = [self.cls, self.mask_embedding]
        for layer in self.layers:
            out.extend(layer.parameters())
        out.extend([self.head_w1, self.head_b1, self.head_w2, self.head_b2])
        return out

    def random_mask(self, frames, rng):
        """Disturb `frames` per the masking protocol.

        Returns (disturbed copy of the frame matrix, MaskRecord). The
        disturbed copy holds the mask embedding's current values; the
        record lets `build_tokens` re-create the disturbance inside the
        graph so the embedding receives gradient.
        """
        frames = np.asarray(frames, dtype=np.float64)
        n = frames.shape[0]
        if n < 1:
            raise ShapeError("cannot mask an empty frame sequence")
        selected = rng.random(n) < SELECT_PROB
        if not selected.any():
            selected[int(rng.integers(0, n))] = True
        idx = np.flatnonzero(selected)
        actions = np.empty(idx.size, dtype=np.int8)
        replacements = np.empty((idx.size, frames.shape[1]), dtype=np.float64)
        for row, i in enumerate(idx):
            u = rng.random()
            if u < 0.8:
                actions[row] = ACTION_EMBED
                replacements[row] = 0.0
            elif u < 0.9 and n > 1:
                actions[row] = ACTION_RANDOM
                j = int(rng.integers(0, n - 1))
                if j >= i:
                    j += 1
                replacements[row] = frames[j]
            else:
                actions[row] = ACTION_KEEP
                replacements[row] = frames[i]
        record = MaskRecord(
            frame_indices=idx.astype(np.int64),
            actions=actions,
            originals=frames[idx].copy(),
            replacements=replacements,
            n_frames=n,
        )
        disturbed = frames.copy()
        disturbed[idx] = replacements
        disturbed[idx[actions == ACTION_EMBED]] = self.mask_embedding.data
        return disturbed, record

    def build_tokens(self, frames, record=None):
        """Assemble the (L+1, D) token tensor: class row, frames, positions.

        With a MaskRecord, the recorded disturbance is replayed in-graph:
        embedding-replaced rows are zeroed in the constant base and the
        mask embedding is added through a 0/1 indicator column, so both
        the class row and the mask embedding are trainable.
        """
        frames = np.asarray(frames, dtype=np.float64)
        n, d = frames.shape
        if d != self.config.model_dim:
            raise ShapeError(
                f"frame dim {d} does not match transformer dim {self.config.model_dim}"
            )
        base = frames
        indicator = None
        if record is not None and len(record) > 0:
            base = frames.copy()
            base[record.frame_indices] = record.replacements
            emb_rows = record.frame_indices[record.actions == ACTION_EMBED]
            if emb_rows.size:
                indicator = np.zeros((n, 1))
                indicator[emb_rows] = 1.0
        body = ad.Tensor(base)
        if indicator is not None:
            body = ad.add(body, ad.mul(ad.Tensor(indicator),
                                       ad.reshape(self.mask_embedding.node, (1, d))))
        cls_row = ad.reshape(self.cls.node, (1, d))
        tokens = ad.concat([cls_row, body], axis=0)
        positions = sinusoidal_positions(n + 1, d)
        return ad.add(tokens, ad.Tensor(positions))

    def encode(self, tokens):
        """Run the layer stack; returns (output (L+1, D), EncodeCache)."""
        x = ad.as_tensor(tokens)
        cache = EncodeCache()
        for layer in self.layers:
            y, qs, ks = multi_head_attention(x, layer, self.config.model_dim)
            cache.queries.append([q.data.copy() for q in qs])
            cache.keys.append([k.data.copy() for k in ks])
            x = layer_norm(ad.add(x, y), layer.ln1_gamma.node, layer.ln1_beta.node)
            f = ffn(x, layer)
            x = layer_norm(ad.add(x, f), layer.ln2_gamma.node, layer.ln2_beta.node)
        return x, cache

    def predict_masked(self, outputs):
        """Reconstruction head over the non-class rows: (L+1, D) -> (L, D)."""
        outputs = ad.as_tensor(outputs)
        d = self.config.model_dim
        frames_out = outputs[1:]
        hidden = ad.relu(ad.add(ad.matmul(frames_out, self.head_w1.node),
                                ad.reshape(self.head_b1.node, (1, d))))
        return ad.add(ad.matmul(hidden, self.head_w2.node),
                      ad.reshape(self.head_b2.node, (1, d)))

    def forward_masked(self, frames, rng):
        """Mask, encode, predict. Returns (predictions, record, cache)."""
        _, record = self.random_mask(frames, rng)
        tokens = self.build_tokens(frames, record)
        outputs, cache = self.encode(tokens)
        return self.predict_masked(outputs), record, cache
