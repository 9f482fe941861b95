from typing import Dict, List

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor

from .module import BatchNorm, Linear, Module
from .pointnet import pool


def knn(features: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of the k nearest rows (the row itself included) for every row.

    Args:
        features: Array of shape (B, N, C) or (N, C).
        k: Neighbour count, k < N.

    Returns:
        np.ndarray: Integer indices of shape (B, N, k) (or (N, k)), ordered by
        distance with ties broken by lower index.
    """
    features = np.asarray(getattr(features, "data", features), dtype=np.float64)
    squeeze = features.ndim == 2
    if squeeze:
        features = features[None]
    n = features.shape[1]
    if k >= n:
        raise ValueError(f"DGCNN needs k < N, got k={k}, N={n}")
    sq = np.sum(features * features, axis=-1)
    d2 = sq[:, :, None] + sq[:, None, :] - 2.0 * np.matmul(features, np.swapaxes(features, 1, 2))
    d2 = np.maximum(d2, 0.0)
    d2[:, np.arange(n), np.arange(n)] = -1.0
    idx = np.argsort(d2, axis=-1, kind="stable")[:, :, :k]
    return idx[0] if squeeze else idx


def edge_features(x, idx: np.ndarray) -> Tensor:
    """
    Explicit EdgeConv input concat(x_i, x_j - x_i) of shape (B, N, k, 2C).
    """
    b, n, c = x.shape
    k = idx.shape[-1]
    flat = F.reshape(x, (b * n, c))
    neighbors = F.gather(flat, idx + (np.arange(b) * n)[:, None, None])
    center = F.broadcast_to(F.reshape(x, (b, n, 1, c)), (b, n, k, c))
    return F.concat([center, neighbors - center], axis=-1)


class EdgeConv(Module):
    """
    Linear -> BatchNorm -> LeakyReLU on edge features, max over neighbours.

    The linear map of concat(x_i, x_j - x_i) is evaluated as
    x_i (W_top - W_bottom) + x_j W_bottom so that the (B, N, k, 2C) edge
    tensor is never materialized.
    """

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        if in_features % 2:
            raise ValueError(f"EdgeConv input width must be even, got {in_features}")
        self.channels = in_features // 2
        self.linear = Linear(in_features, out_features)
        self.norm = BatchNorm(out_features)

    def forward(self, x, idx: np.ndarray) -> Tensor:
        b, n, c = x.shape
        if c != self.channels:
            raise ValueError(f"EdgeConv expects {self.channels} channels, got {c}")
        k = idx.shape[-1]
        weight = self.linear.param("weight")
        w_top, w_bottom = weight[:c], weight[c:]
        center = F.matmul(x, w_top - w_bottom) + self.linear.param("bias")
        flat = F.reshape(F.matmul(x, w_bottom), (b * n, -1))
        neighbors = F.gather(flat, idx + (np.arange(b) * n)[:, None, None])
        out = neighbors + F.reshape(center, (b, n, 1, -1))
        out = F.leaky_relu(self.norm(out), 0.2)
        return F.max_over_points(out, axis=-2)


class DGCNNEncoder(Module):
    """
    Five EdgeConv layers with k-NN graphs recomputed in feature space before
    each layer; global feature [max; avg] over points of the last layer.
    """

    def __init__(self, dims: Dict[str, List[int]], k: int = 20):
        super().__init__()
        self.k = k
        self.depth = len([name for name in dims if name.startswith("edge")])
        for i in range(self.depth):
            setattr(self, f"edge{i}", EdgeConv(*dims[f"edge{i}"]))

    def per_point(self, cloud, return_graphs: bool = False):
        x = cloud if isinstance(cloud, Tensor) else Tensor(cloud)
        graphs = []
        for i in range(self.depth):
            idx = knn(x.data, self.k)
            graphs.append(idx)
            x = getattr(self, f"edge{i}")(x, idx)
        return (x, graphs) if return_graphs else x

    def forward(self, cloud) -> Tensor:
        return pool(self.per_point(cloud), "mix")
