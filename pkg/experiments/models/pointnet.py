from typing import Sequence

from autodiff import functional as F
from autodiff.tensor import Tensor

from .module import MLP, Module

POOL_MODES = ("max", "avg", "mix")


def pool(features, mode: str) -> Tensor:
    """
    Pool per-point feature rows (..., N, C) into a global feature.

    max and avg reduce over the point axis; mix concatenates [max; avg].
    """
    if mode not in POOL_MODES:
        raise ValueError(f"Pooling: {mode} not supported")
    if features.shape[-2] == 0:
        raise ValueError("Cannot pool an empty feature set")
    if mode == "max":
        return F.max_over_points(features, axis=-2)
    if mode == "avg":
        return F.mean_over_points(features, axis=-2)
    return F.concat([F.max_over_points(features, axis=-2), F.mean_over_points(features, axis=-2)], axis=-1)


class PointNetEncoder(Module):
    """
    Shared per-point MLP followed by symmetric pooling.
    """

    def __init__(self, dims: Sequence[int], pooling: str):
        super().__init__()
        if pooling not in POOL_MODES:
            raise ValueError(f"Pooling: {pooling} not supported")
        self.pooling = pooling
        self.mlp = MLP(dims, activate_last=True)

    def per_point(self, cloud) -> Tensor:
        if cloud.shape[-1] != 3:
            raise ValueError(f"Expected clouds with 3 coordinates, got shape {cloud.shape}")
        return self.mlp(cloud)

    def forward(self, cloud) -> Tensor:
        return pool(self.per_point(cloud), self.pooling)
