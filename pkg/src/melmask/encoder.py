"""Fully convolutional encoder and projection head.

The encoder treats an L x D frame matrix as a one-channel image and runs
four blocks of conv 3x3 -> batch norm -> ReLU -> max pool, then a global
max over the remaining grid and a linear map to the representation size
(512 by default). The projection head is linear -> ReLU -> linear into
the 256-dim contrastive space. Both branches share one instance of each.

Batch normalization uses population statistics (divide by N) both inside
the step and for the running buffers; `training` switches between batch
and running statistics, and `update_stats=False` lets callers run a
training-mode forward without touching the buffers (finite-difference
checks need that).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import InputTooShortError, ShapeError
from .params import Parameter, glorot_uniform


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple = (64, 128, 128, 64)
    pools: tuple = ((2, 4), (2, 4), (2, 4), (2, 2))
    repr_dim: int = 512
    proj_hidden: int = 512
    proj_dim: int = 256
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        if len(self.channels) != 4 or len(self.pools) != 4:
            raise ValueError(
                f"encoder is a 4-block network, got {len(self.channels)} channel "
                f"widths and {len(self.pools)} pool shapes"
            )
        if any(c < 1 for c in self.channels):
            raise ValueError(f"channel widths must be positive: {self.channels}")
        if any(len(p) != 2 or p[0] < 1 or p[1] < 1 for p in self.pools):
            raise ValueError(f"pool shapes must be pairs of positive ints: {self.pools}")
        if min(self.repr_dim, self.proj_hidden, self.proj_dim) < 1:
            raise ValueError("projection dimensions must be positive")

    @property
    def min_frames(self):
        """Smallest L that survives the time-axis pooling pyramid."""
        out = 1
        for p in reversed(self.pools):
            out *= p[0]
        return out

    @property
    def min_bins(self):
        out = 1
        for p in reversed(self.pools):
            out *= p[1]
        return out


class ConvEncoder:
    """4-block convolutional feature extractor over (B, 1, L, D) inputs."""

    def __init__(self, config, rng):
        self.config = config
        self.training = True
        self.conv_w = []
        self.conv_b = []
        self.bn_gamma = []
        self.bn_beta = []
        self.running_mean = []
        self.running_var = []
        in_ch = 1
        for i, out_ch in enumerate(config.channels):
            fan_in = in_ch * 9
            fan_out = out_ch * 9
            self.conv_w.append(Parameter(
                f"encoder.block{i}.conv.w",
                glorot_uniform(rng, (out_ch, in_ch, 3, 3), fan_in, fan_out)))
            self.conv_b.append(Parameter(f"encoder.block{i}.conv.b", np.zeros(out_ch)))
            self.bn_gamma.append(Parameter(f"encoder.block{i}.bn.gamma", np.ones(out_ch)))
            self.bn_beta.append(Parameter(f"encoder.block{i}.bn.beta", np.zeros(out_ch)))
            self.running_mean.append(np.zeros(out_ch))
            self.running_var.append(np.ones(out_ch))
            in_ch = out_ch
        c_last = config.channels[-1]
        self.linear_w = Parameter(
            "encoder.linear.w",
            glorot_uniform(rng, (c_last, config.repr_dim), c_last, config.repr_dim))
        self.linear_b = Parameter("encoder.linear.b", np.zeros(config.repr_dim))

    def parameters(self):
        out = []
        for i in range(4):
            out.extend([self.conv_w[i], self.conv_b[i], self.bn_gamma[i], self.bn_beta[i]])
        out.extend([self.linear_w, self.linear_b])
        return out

    def buffers(self):
        """Non-trainable state (batch-norm running statistics), by name."""
        out = {}
        for i in range(4):
            out[f"encoder.block{i}.bn.running_mean"] = self.running_mean[i]
            out[f"encoder.block{i}.bn.running_var"] = self.running_var[i]
        return out

    def param_count(self):
        return sum(p.data.size for p in self.parameters())

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def _batch_norm(self, x, i, update_stats):
        cfg = self.config
        c = x.data.shape[1]
        if self.training:
            mu = ad.mean(x, axis=(0, 2, 3), keepdims=True)
            var = ad.mean(ad.square(ad.sub(x, mu)), axis=(0, 2, 3), keepdims=True)
            if update_stats:
                m = cfg.bn_momentum
                self.running_mean[i] = (1 - m) * self.running_mean[i] + m * mu.data.reshape(c)
                self.running_var[i] = (1 - m) * self.running_var[i] + m * var.data.reshape(c)
            normed = ad.div(ad.sub(x, mu), ad.sqrt(ad.add(var, cfg.bn_eps)))
        else:
            mu = self.running_mean[i].reshape(1, c, 1, 1)
            std = np.sqrt(self.running_var[i] + cfg.bn_eps).reshape(1, c, 1, 1)
            normed = ad.div(ad.sub(x, ad.Tensor(mu)), ad.Tensor(std))
        gamma = ad.reshape(self.bn_gamma[i].node, (1, c, 1, 1))
        beta = ad.reshape(self.bn_beta[i].node, (1, c, 1, 1))
        return ad.add(ad.mul(normed, gamma), beta)

    def forward(self, x, update_stats=True):
        """(B, 1, L, D) -> (B, repr_dim). Raises if L or D under-fills the pools."""
        x = ad.as_tensor(x)
        if x.data.ndim != 4 or x.data.shape[1] != 1:
            raise ShapeError(f"encoder expects (B, 1, L, D) input, got {x.data.shape}")
        _, _, n_frames, n_bins = x.data.shape
        if n_frames < self.config.min_frames:
            raise InputTooShortError(
                f"need at least {self.config.min_frames} frames for the pooling "
                f"pyramid, got {n_frames}"
            )
        if n_bins < self.config.min_bins:
            raise InputTooShortError(
                f"need at least {self.config.min_bins} bins for the pooling "
                f"pyramid, got {n_bins}"
            )
        for i in range(4):
            c = self.config.channels[i]
            x = ad.conv2d(x, self.conv_w[i].node, stride=(1, 1), pad=(1, 1))
            x = ad.add(x, ad.reshape(self.conv_b[i].node, (1, c, 1, 1)))
            x = self._batch_norm(x, i, update_stats)
            x = ad.relu(x)
            x = ad.maxpool2d(x, self.config.pools[i])
        b, c = x.data.shape[0], x.data.shape[1]
        flat = ad.reshape(x, (b, c, x.data.shape[2] * x.data.shape[3]))
        pooled = ad.max_reduce(flat, axis=2)
        return ad.add(ad.matmul(pooled, self.linear_w.node),
                      ad.reshape(self.linear_b.node, (1, self.config.repr_dim)))

    def encode_frames(self, frames):
        """Single frame matrix (L, D) -> plain (repr_dim,) array, eval mode."""
        frames = np.asarray(frames, dtype=np.float64)
        if frames.ndim != 2:
            raise ShapeError(f"expected a 2-D frame matrix, got shape {frames.shape}")
        was_training = self.training
        self.training = False
        try:
            out = self.forward(frames[None, None], update_stats=False)
        finally:
            self.training = was_training
        return out.data[0].copy()


class ProjectionHead:
    """Contrastive projection: linear -> ReLU -> linear, 512 -> 512 -> 256."""

    def __init__(self, config, rng):
        self.config = config
        self.w1 = Parameter("projection.w1", glorot_uniform(
            rng, (config.repr_dim, config.proj_hidden), config.repr_dim, config.proj_hidden))
        self.b1 = Parameter("projection.b1", np.zeros(config.proj_hidden))
        self.w2 = Parameter("projection.w2", glorot_uniform(
            rng, (config.proj_hidden, config.proj_dim), config.proj_hidden, config.proj_dim))
        self.b2 = Parameter("projection.b2", np.zeros(config.proj_dim))

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def forward(self, x):
        x = ad.as_tensor(x)
        if x.data.ndim != 2 or x.data.shape[1] != self.config.repr_dim:
            raise ShapeError(
                f"projection expects (B, {self.config.repr_dim}) input, got {x.data.shape}"
            )
        hidden = ad.relu(ad.add(ad.matmul(x, self.w1.node),
                                ad.reshape(self.b1.node, (1, self.config.proj_hidden))))
        return ad.add(ad.matmul(hidden, self.w2.node),
                      ad.reshape(self.b2.node, (1, self.config.proj_dim)))
