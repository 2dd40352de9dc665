"""Self-supervised music representation learning with score-driven frame masking.

Pipeline: waveform -> augmentation -> log-mel frames -> masked transformer
prediction + attention-derived frame scores -> positive/negative frame
masks -> convolutional encoder -> cross-correlation objectives. Training,
linear probing, retrieval evaluation and a small CLI sit on top.
"""

__version__ = "0.1.0"

from .errors import MelmaskError

__all__ = ["MelmaskError", "__version__"]
