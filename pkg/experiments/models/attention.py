from typing import Dict, List, Optional

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor

from .module import MLP, Module
from .pointnet import pool


def attention_block(features, g, h, k, omega: Optional[Tensor] = None) -> Tensor:
    """
    Self-attention residual: features + omega * SoftMax(G H^T) K.

    Without `omega` the plain form features + SoftMax(G H^T) K is returned.
    All inputs are (B, N, C) row features.
    """
    if features.shape[-1] != k.shape[-1]:
        raise ValueError(f"Attention values must match the feature width: {k.shape} vs {features.shape}")
    weights = F.softmax(F.matmul(g, F.swap_last(h)), axis=-1)
    attended = F.matmul(weights, k)
    if omega is None:
        return features + attended
    return features + attended * omega


class AttentionEncoder(Module):
    """
    PointNet encoder with a self-attention unit between two shared MLPs.

    Args:
        dims: Layer widths for the stem, g, h, k and post blocks.
        pooling: Final pooling mode.
        variant: "gated" uses a learnable residual weight omega (zero at init),
            "plain" adds the attended features directly.
        fuse_early: Concatenate the tiled max-pooled stem feature to every row
            before attention.
    """

    def __init__(self, dims: Dict[str, List[int]], pooling: str, variant: str = "gated", fuse_early: bool = False):
        super().__init__()
        self.pooling = pooling
        self.variant = variant
        self.fuse_early = fuse_early
        self.stem = MLP(dims["stem"], activate_last=True)
        self.g = MLP(dims["g"], activate_last=True)
        self.h = MLP(dims["h"], activate_last=True)
        self.k = MLP(dims["k"], activate_last=True)
        self.post = MLP(dims["post"], activate_last=True)
        if variant == "gated":
            self.register_parameter("omega", np.zeros(1))

    def _reset(self, rng):
        if "omega" in self._parameters:
            self._parameters["omega"][...] = 0.0

    def fuse(self, features) -> Tensor:
        top = F.max_over_points(features, axis=-2)
        tiled = F.broadcast_to(F.reshape(top, top.shape[:-1] + (1, top.shape[-1])), features.shape)
        return F.concat([features, tiled], axis=-1)

    def per_point(self, cloud) -> Tensor:
        features = self.stem(cloud)
        if self.fuse_early:
            features = self.fuse(features)
        omega = self.param("omega") if self.variant == "gated" else None
        weighted = attention_block(features, self.g(features), self.h(features), self.k(features), omega)
        return self.post(weighted)

    def forward(self, cloud) -> Tensor:
        return pool(self.per_point(cloud), self.pooling)
