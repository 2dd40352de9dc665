"""Reverse-mode automatic differentiation on float64 numpy arrays.

A `Tensor` wraps an ndarray plus the closure that maps its output gradient
to its parents' gradients. `backward()` on a scalar runs one deterministic
reverse topological sweep; gradients accumulate by summation so shared
subexpressions are handled naturally. Graphs are built per step and
discarded; only leaf tensors (parameters) keep their `.grad` between steps
until explicitly cleared.

All ops promote inputs to float64. Elementwise arithmetic follows numpy
broadcasting, with gradients summed back down to each operand's shape.
"""

import numpy as np

from .errors import ContractError, ShapeError
from . import kernels


def _as_array(value):
    arr = np.asarray(value, dtype=np.float64)
    return arr


def as_tensor(value):
    """Wrap `value` in a constant Tensor unless it already is one."""
    if isinstance(value, Tensor):
        return value
    return Tensor(_as_array(value))


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, inverting numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


class Tensor:
    """Node in the autodiff graph: float64 data, parents, backward closure."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = _as_array(data)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        leaf = "leaf" if self._backward is None else "node"
        return f"Tensor(shape={self.data.shape}, {leaf})"

    def detach(self):
        """Constant copy sharing no graph history (data is copied)."""
        return Tensor(self.data.copy())

    def item(self):
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Accumulate d(self)/d(leaf) into `.grad` over the whole graph.

        Only defined for scalar outputs. Deterministic: visitation order
        depends only on graph construction order.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward() requires a scalar output, got shape {self.data.shape}"
            )
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, piece in zip(node._parents, node._backward(node.grad)):
                if piece is None:
                    continue
                if parent.grad is None:
                    parent.grad = piece.copy() if piece.base is not None else piece
                else:
                    parent.grad = parent.grad + piece

    # -- operator sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __getitem__(self, key):
        return take(self, key)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


# -- elementwise arithmetic ---------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "add")

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(a.data + b.data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return Tensor(a.data - b.data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")

    def backward(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return Tensor(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "div")

    def backward(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return Tensor(a.data / b.data, (a, b), backward)


def neg(a):
    a = as_tensor(a)

    def backward(g):
        return (-g,)

    return Tensor(-a.data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)

    def backward(g):
        return (g * out,)

    return Tensor(out, (a,), backward)


def log(a):
    a = as_tensor(a)

    def backward(g):
        return (g / a.data,)

    return Tensor(np.log(a.data), (a,), backward)


def sqrt(a):
    a = as_tensor(a)
    out = np.sqrt(a.data)

    def backward(g):
        return (g * (0.5 / out),)

    return Tensor(out, (a,), backward)


def square(a):
    a = as_tensor(a)

    def backward(g):
        return (g * (2.0 * a.data),)

    return Tensor(a.data * a.data, (a,), backward)


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0.0

    def backward(g):
        return (g * mask,)

    return Tensor(np.where(mask, a.data, 0.0), (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    out = np.where(x >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward(g):
        return (g * out * (1.0 - out),)

    return Tensor(out, (a,), backward)


def smooth_l1(a):
    """Elementwise smooth L1: 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise."""
    a = as_tensor(a)
    x = a.data
    inner = np.abs(x) < 1.0
    out = np.where(inner, 0.5 * x * x, np.abs(x) - 0.5)

    def backward(g):
        return (g * np.where(inner, x, np.sign(x)),)

    return Tensor(out, (a,), backward)


# -- linear algebra and shape ops ----------------------------------------


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.data.shape} @ {b.data.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor(a.data @ b.data, (a, b), backward)


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (np.ascontiguousarray(g.transpose(inverse)),)

    return Tensor(np.ascontiguousarray(a.data.transpose(axes)), (a,), backward)


def reshape(a, shape):
    a = as_tensor(a)
    original = a.data.shape

    def backward(g):
        return (g.reshape(original),)

    return Tensor(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ContractError("concat of zero tensors")
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def take(a, key):
    """Indexing with ints, slices, or integer arrays; gradient scatter-adds."""
    a = as_tensor(a)
    if isinstance(key, Tensor):
        raise ContractError("index must be constant, not a Tensor")
    fancy = isinstance(key, np.ndarray) or (
        isinstance(key, tuple) and any(isinstance(k, np.ndarray) for k in key)
    )

    def backward(g):
        gx = np.zeros_like(a.data)
        if fancy:
            np.add.at(gx, key, g)
        else:
            gx[key] += g
        return (gx,)

    out = a.data[key]
    if out.base is not None:
        out = out.copy()
    return Tensor(out, (a,), backward)


def gather_rows(a, indices):
    """Select rows of a 2-D tensor; duplicate indices accumulate gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    if a.data.ndim != 2 or idx.ndim != 1:
        raise ShapeError(f"gather_rows expects (matrix, vector), got {a.data.shape}, {idx.shape}")

    def backward(g):
        gx = np.zeros_like(a.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return Tensor(a.data[idx].copy(), (a,), backward)


# -- reductions -----------------------------------------------------------


def sum_(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, a.data.shape).copy(),)

    return Tensor(out, (a,), backward)


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    elif isinstance(axis, tuple):
        count = 1
        for ax in axis:
            count *= a.data.shape[ax]
    else:
        count = a.data.shape[axis]
    scaled = sum_(a, axis=axis, keepdims=keepdims)
    return mul(scaled, Tensor(np.float64(1.0 / count)))


def max_reduce(a, axis):
    """Max over one axis; gradient flows to the first argmax per slice."""
    a = as_tensor(a)
    idx = np.argmax(a.data, axis=axis)
    out = np.take_along_axis(a.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)

    def backward(g):
        gx = np.zeros_like(a.data)
        np.put_along_axis(
            gx, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis
        )
        return (gx,)

    return Tensor(out, (a,), backward)


def softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return ((g - inner) * out,)

    return Tensor(out, (a,), backward)


# -- stable fused heads ----------------------------------------------------


def bce_with_logits(logits, targets):
    """Elementwise binary cross-entropy on raw logits, numerically stable.

    `targets` is a constant array in [0, 1] of the same shape.
    """
    logits = as_tensor(logits)
    y = _as_array(targets)
    if y.shape != logits.data.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.data.shape} vs targets {y.shape}")
    z = logits.data
    out = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = np.where(z >= 0.0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))

    def backward(g):
        return (g * (sig - y),)

    return Tensor(out, (logits,), backward)


def softmax_cross_entropy(logits, onehot):
    """Per-row cross-entropy of softmax(logits) against constant one-hot rows."""
    logits = as_tensor(logits)
    y = _as_array(onehot)
    if y.shape != logits.data.shape or logits.data.ndim != 2:
        raise ShapeError(
            f"softmax_cross_entropy: logits {logits.data.shape} vs targets {y.shape}"
        )
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    out = lse - (z * y).sum(axis=1)
    probs = np.exp(z - zmax)
    probs /= probs.sum(axis=1, keepdims=True)

    def backward(g):
        return (g[:, None] * (probs - y),)

    return Tensor(out, (logits,), backward)


# -- spatial kernels --------------------------------------------------------


def conv2d(x, w, stride=(1, 1), pad=(0, 0)):
    """2-D cross-correlation over (N, C, H, W) inputs with OIHW weights."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and weight, got {x.data.shape}, {w.data.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.data.shape} vs weight {w.data.shape}"
        )
    out = kernels.conv2d_forward(x.data, w.data, stride, pad)

    def backward(g):
        return kernels.conv2d_backward(x.data, w.data, g, stride, pad)

    return Tensor(out, (x, w), backward)


def maxpool2d(x, pool):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a

    window are cropped (they receive zero gradient)."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeError(f"maxpool2d expects 4-D input, got {x.data.shape}")
    out, argmax = kernels.maxpool2d_forward(x.data, pool)
    shape = x.data.shape

    def backward(g):
        return (kernels.maxpool2d_backward(g, argmax, shape, pool),)

    return Tensor(out, (x,), backward)
