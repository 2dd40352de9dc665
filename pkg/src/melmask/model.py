"""The full pre-training model: shared transformer, encoder, projection.

`example_views` runs one example's two frame matrices through the masked
transformer passes, computes the cross-branch frame scores, and returns
the raw encoder views (plain branch-1 frames, positively and negatively
masked branch-2 frames) together with the example's prediction loss. The
encoder consumes plain arrays: the mask is a stop-gradient boundary, so
contrastive losses reach only encoder/projection parameters while the
prediction loss reaches only transformer parameters.

`mask_mode` selects the ablation variant: "posneg" (full objective),
"pos" (positive mask only, no negative term), "none" (branch 2 encoded
unmasked, no negative term).
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import losses
from .encoder import ConvEncoder, ProjectionHead
from .masking import apply_mask, frame_scores, negative_mask, positive_mask
from .params import check_unique_names
from .transformer import TransformerEncoder


@dataclass
class ExampleViews:
    """Per-example training artifacts prior to batching."""

    pred_loss: object  # scalar Tensor: branch-1 + branch-2 prediction losses
    branch1: np.ndarray
    positive: np.ndarray
    negative: np.ndarray  # None when mask_mode != "posneg"
    scores: object  # FrameScores, None when mask_mode == "none"
    mask: object  # MaskMatrix, None when mask_mode == "none"


class PretrainModel:
    def __init__(self, train_config, rng):
        self.train_config = train_config
        self.transformer = TransformerEncoder(train_config.transformer_config(), rng)
        self.encoder = ConvEncoder(train_config.encoder_config(), rng)
        self.projection = ProjectionHead(train_config.encoder_config(), rng)

    def parameters(self):
        return check_unique_names(
            self.transformer.parameters()
            + self.encoder.parameters()
            + self.projection.parameters()
        )

    def named_parameters(self):
        return {p.name: p for p in self.parameters()}

    def buffers(self):
        return self.encoder.buffers()

    def example_views(self, frames1, frames2, rng, mask_ratio=None, mask_mode=None):
        """Masked transformer passes + mask construction for one example."""
        cfg = self.train_config
        ratio = cfg.mask_ratio if mask_ratio is None else mask_ratio
        mode = cfg.mask_mode if mask_mode is None else mask_mode

        pred1, rec1, cache1 = self.transformer.forward_masked(frames1, rng)
        pred2, rec2, cache2 = self.transformer.forward_masked(frames2, rng)
        lp = ad.add(losses.pred_loss(frames1, pred1, rec1.frame_indices),
                    losses.pred_loss(frames2, pred2, rec2.frame_indices))

        if mode == "none":
            return ExampleViews(pred_loss=lp, branch1=np.asarray(frames1, dtype=np.float64),
                                positive=np.asarray(frames2, dtype=np.float64),
                                negative=None, scores=None, mask=None)

        scores = frame_scores(cache1.cls_queries(), cache2.cls_queries(),
                              cache2.frame_keys())
        mask = positive_mask(scores, ratio)
        f_pos = apply_mask(frames2, mask)
        f_neg = apply_mask(frames2, negative_mask(mask)) if mode == "posneg" else None
        return ExampleViews(pred_loss=lp, branch1=np.asarray(frames1, dtype=np.float64),
                            positive=f_pos, negative=f_neg, scores=scores, mask=mask)

    def batch_losses(self, views, lam=None, update_stats=True):
        """Encode stacked views and assemble the three loss components.

        Returns (l_pred, l_pos, l_neg, total) as graph tensors; l_neg is a
        constant zero when no view carries a negative matrix.
        """
        lam = self.train_config.lam if lam is None else lam
        l_pred = ad.mul(ad.concat([ad.reshape(v.pred_loss, (1,)) for v in views], axis=0).sum(),
                        1.0 / len(views))

        def embed(matrices):
            stacked = np.stack(matrices)[:, None]
            return self.projection.forward(
                self.encoder.forward(ad.Tensor(stacked), update_stats=update_stats))

        z1 = embed([v.branch1 for v in views])
        z_pos = embed([v.positive for v in views])
        u = losses.cross_correlation(z1, z_pos)
        l_pos_t = losses.l_pos(u, lam)
        if all(v.negative is not None for v in views):
            z_neg = embed([v.negative for v in views])
            v_mat = losses.cross_correlation(z1, z_neg)
            l_neg_t = losses.l_neg(v_mat, lam)
        else:
            l_neg_t = ad.Tensor(0.0)
        total = losses.total_loss(l_pred, l_pos_t, l_neg_t)
        return l_pred, l_pos_t, l_neg_t, total
