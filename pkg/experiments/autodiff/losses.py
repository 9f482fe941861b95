import numpy as np

from . import functional as F
from .tensor import Tensor, as_tensor


class BCEWithLogitsLoss:
    """
    Binary cross-entropy on logits: mean(softplus(z) - y * z).
    """

    def __init__(self, reduction: str = "mean"):
        if reduction not in ("mean", "sum"):
            raise ValueError(f"Reduction: {reduction} not supported")
        self.reduction = reduction

    def __call__(self, logits: Tensor, targets) -> Tensor:
        logits = as_tensor(logits)
        targets = np.asarray(targets, dtype=np.float64).reshape(logits.shape)
        losses = F.softplus(logits) - logits * targets
        return losses.mean() if self.reduction == "mean" else losses.sum()


class CrossEntropyLoss:
    """
    Multi-class cross-entropy on logits of shape (B, C) and integer targets.
    """

    def __init__(self, reduction: str = "mean"):
        if reduction not in ("mean", "sum"):
            raise ValueError(f"Reduction: {reduction} not supported")
        self.reduction = reduction

    def __call__(self, logits: Tensor, targets) -> Tensor:
        logits = as_tensor(logits)
        targets = np.asarray(targets, dtype=np.int64)
        if logits.ndim != 2 or len(targets) != logits.shape[0]:
            raise ValueError(f"Expected logits (B, C) and B targets, got {logits.shape} and {targets.shape}")
        one_hot = np.eye(logits.shape[1])[targets]
        losses = -F.sum(F.log_softmax(logits, axis=-1) * one_hot, axis=-1)
        return losses.mean() if self.reduction == "mean" else losses.sum()
