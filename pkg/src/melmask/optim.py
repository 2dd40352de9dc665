"""Adam with decoupled weight decay.

Decay is applied directly to the parameter value before the moment update
(`p -= lr * wd * p`), so it never enters the running moments. Moments are
bias-corrected with a step counter shared across all parameters.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, *, lr, beta1=0.9, beta2=0.999,
              eps=1e-8, weight_decay=0.0):
    """One Adam update over `params` (dict name -> ndarray), in place.

    `grads` maps the same names to gradient arrays; missing names are
    skipped (frozen parameters). Raises DivergenceError naming the first
    parameter whose gradient contains a non-finite value.
    """
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name in params:
        if name not in grads or grads[name] is None:
            continue
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient for parameter {name!r} at step {t}")
        p = params[name]
        if p.shape != g.shape:
            raise DivergenceError(
                f"gradient shape {g.shape} does not match parameter {name!r} shape {p.shape}"
            )
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        if weight_decay != 0.0:
            p -= lr * weight_decay * p
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params


class Adam:
    """Stateful wrapper binding `adam_step` to a list of named parameters.

    `parameters` is a sequence of objects with `.name` and `.node` (a
    Tensor); `step()` consumes each node's `.grad` and clears it.
    """

    def __init__(self, parameters, *, lr, beta1=0.9, beta2=0.999,
                 eps=1e-8, weight_decay=0.0):
        names = [p.name for p in parameters]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate parameter names: {dupes}")
        self.parameters = list(parameters)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState()

    def step(self):
        params = {p.name: p.node.data for p in self.parameters}
        grads = {p.name: p.node.grad for p in self.parameters}
        adam_step(params, grads, self.state, lr=self.lr, beta1=self.beta1,
                  beta2=self.beta2, eps=self.eps, weight_decay=self.weight_decay)
        self.zero_grad()

    def zero_grad(self):
        for p in self.parameters:
            p.node.grad = None

    def state_dict(self):
        return {
            "t": self.state.t,
            "m": {k: v.copy() for k, v in self.state.m.items()},
            "v": {k: v.copy() for k, v in self.state.v.items()},
        }

    def load_state_dict(self, blob):
        self.state.t = int(blob["t"])
        self.state.m = {k: np.asarray(v, dtype=np.float64).copy() for k, v in blob["m"].items()}
        self.state.v = {k: np.asarray(v, dtype=np.float64).copy() for k, v in blob["v"].items()}
