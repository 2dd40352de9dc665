"""Named trainable parameters and their initializers.

A Parameter owns a leaf Tensor plus a globally unique name; optimizers and
checkpoints address parameters by that name. Initializers take an explicit
numpy Generator so model construction is reproducible.
"""

import numpy as np

from .autodiff import Tensor


class Parameter:
    """A named leaf tensor updated in place by the optimizer."""

    __slots__ = ("name", "node", "trainable")

    def __init__(self, name, data, trainable=True):
        self.name = name
        self.node = Tensor(np.array(data, dtype=np.float64, copy=True))
        self.trainable = trainable

    @property
    def data(self):
        return self.node.data

    @property
    def shape(self):
        return self.node.data.shape

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.node.data.shape})"


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def normal_init(rng, shape, std=0.02):
    return rng.normal(0.0, std, size=shape)


def check_unique_names(parameters):
    """Raise if any two parameters share a name."""
    names = [p.name for p in parameters]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ValueError(f"duplicate parameter names: {dupes}")
    return parameters
