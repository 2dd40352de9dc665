"""Training objectives.

Three components, summed unweighted:

  - masked-frame prediction: smooth L1 between original and predicted
    rows, summed over the masked index set and all coordinates;
  - positive contrastive: the cross-correlation between the plain-branch
    projections and the positive-view projections is pushed toward the
    identity (squared diagonal deviation plus lambda-weighted squared
    off-diagonals);
  - negative contrastive: the diagonal of the correlation with the
    negative view is pushed toward zero (off-diagonals unpenalized).

Cross-correlation standardizes each feature over the batch (population
variance, 1e-9 guard inside the square root), so entries live in [-1, 1];
a zero-variance feature standardizes to the zero column.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DegenerateBatchError, DivergenceError, NoMaskedFramesError, ShapeError

STANDARDIZE_EPS = 1e-9


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.005

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


def smooth_l1_value(x):
    """Closed-form smooth L1 on plain arrays: 0.5 x^2 inside |x| < 1, |x| - 0.5 outside."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.abs(x) < 1.0, 0.5 * x * x, np.abs(x) - 0.5)


def pred_loss(original, predictions, indices):
    """Sum of smooth L1 over masked rows: indices select rows of both matrices."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise NoMaskedFramesError("prediction loss needs at least one masked frame")
    original = np.asarray(original, dtype=np.float64)
    predictions = ad.as_tensor(predictions)
    if original.shape != predictions.data.shape:
        raise ShapeError(
            f"original frames {original.shape} vs predictions {predictions.data.shape}"
        )
    target = original[idx]
    picked = ad.gather_rows(predictions, idx)
    return ad.sum_(ad.smooth_l1(ad.sub(ad.Tensor(target), picked)))


def standardize_columns(z):
    """Zero-mean, unit-variance per feature over the batch dimension."""
    z = ad.as_tensor(z)
    mu = ad.mean(z, axis=0, keepdims=True)
    centered = ad.sub(z, mu)
    var = ad.mean(ad.square(centered), axis=0, keepdims=True)
    return ad.div(centered, ad.sqrt(ad.add(var, STANDARDIZE_EPS)))


def cross_correlation(a, b):
    """(1/B) A_hat^T B_hat over batch-standardized embedding matrices."""
    a = ad.as_tensor(a)
    b = ad.as_tensor(b)
    if a.data.ndim != 2 or a.data.shape != b.data.shape:
        raise ShapeError(
            f"cross-correlation needs equal 2-D batches, got {a.data.shape} and {b.data.shape}"
        )
    n = a.data.shape[0]
    if n < 2:
        raise DegenerateBatchError(f"cross-correlation needs a batch of >= 2, got {n}")
    ah = standardize_columns(a)
    bh = standardize_columns(b)
    return ad.mul(ad.matmul(ad.transpose(ah), bh), 1.0 / n)


def l_pos(u, lam):
    """Sum_i (1 - U_ii)^2 + lam * sum_{i != j} U_ij^2."""
    u = ad.as_tensor(u)
    d = u.data.shape[0]
    if u.data.ndim != 2 or u.data.shape[1] != d:
        raise ShapeError(f"expected a square correlation matrix, got {u.data.shape}")
    eye = np.eye(d)
    diag = ad.sum_(ad.mul(u, eye), axis=1)
    on_diag = ad.sum_(ad.square(ad.sub(1.0, diag)))
    off_diag = ad.sum_(ad.square(ad.mul(u, 1.0 - eye)))
    return ad.add(on_diag, ad.mul(off_diag, lam))


def l_neg(v, lam):
    """lam * sum_i V_ii^2; off-diagonals do not contribute."""
    v = ad.as_tensor(v)
    d = v.data.shape[0]
    if v.data.ndim != 2 or v.data.shape[1] != d:
        raise ShapeError(f"expected a square correlation matrix, got {v.data.shape}")
    diag = ad.sum_(ad.mul(v, np.eye(d)), axis=1)
    return ad.mul(ad.sum_(ad.square(diag)), lam)


def total_loss(pred, pos, neg):
    """Unweighted sum; raises naming the first non-finite component."""
    for name, part in (("l_pred", pred), ("l_pos", pos), ("l_neg", neg)):
        value = part.data if isinstance(part, ad.Tensor) else part
        if not np.all(np.isfinite(value)):
            raise DivergenceError(f"loss component {name} is non-finite")
    return ad.add(ad.add(ad.as_tensor(pred), ad.as_tensor(pos)), ad.as_tensor(neg))
