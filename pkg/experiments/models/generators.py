import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tensor, as_tensor

from .module import MLP, Module


def _latent(z, latent_dim: int) -> Tensor:
    z = as_tensor(z)
    if z.ndim == 1:
        z = F.reshape(z, (1, -1))
    if z.ndim != 2 or z.shape[-1] != latent_dim:
        raise ValueError(f"Expected latent codes of size {latent_dim}, got shape {z.shape}")
    return z


class FCGenerator(Module):
    """
    Latent code -> MLP -> Sigmoid - 0.5, reshaped to (B, N, 3).
    """

    def __init__(self, dims, num_points: int):
        super().__init__()
        self.num_points = num_points
        self.latent_dim = dims[0]
        self.mlp = MLP(dims, activate_last=False)

    def forward(self, z) -> Tensor:
        z = _latent(z, self.latent_dim)
        out = F.sigmoid(self.mlp(z)) - 0.5
        return F.reshape(out, (z.shape[0], self.num_points, 3))


class DeformGenerator(Module):
    """
    Deforms template points with a latent code.

    concat(point, z) -> MLP with batch norm on its last layer -> MLP -> Sigmoid - 0.5.
    """

    def __init__(self, deform_dims, out_dims, num_points: int):
        super().__init__()
        self.num_points = num_points
        self.latent_dim = deform_dims[0] - 3
        self.deform = MLP(deform_dims, activate_last=True, norm_last=True)
        self.out = MLP(out_dims, activate_last=False)

    def forward(self, z, template) -> Tensor:
        z = _latent(z, self.latent_dim)
        template = np.asarray(getattr(template, "data", template), dtype=np.float64)
        if template.ndim == 2:
            template = np.broadcast_to(template, (z.shape[0],) + template.shape)
        if template.ndim != 3 or template.shape[-1] != 3 or len(template) != z.shape[0]:
            raise ValueError(f"Template must have shape (B, N, 3) with B={z.shape[0]}, got {template.shape}")
        b, n, _ = template.shape
        codes = F.broadcast_to(F.reshape(z, (b, 1, self.latent_dim)), (b, n, self.latent_dim))
        x = F.concat([Tensor(template), codes], axis=-1)
        return F.sigmoid(self.out(self.deform(x))) - 0.5
