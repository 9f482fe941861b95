from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import KDTree

from .cloud import as_cloud

BRUTE_FORCE_LIMIT = 1024


@dataclass(frozen=True)
class DensityField:
    """
    Per-point neighbour counts of a cloud.

    Attributes:
        values: Integer counts, one per point, each >= 1.
        bandwidth: Radius of the counting ball.
    """
    values: np.ndarray
    bandwidth: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.int64)
        if values.ndim != 1 or len(values) == 0:
            raise ValueError("Density field must be a non-empty vector")
        if values.min() < 1:
            raise ValueError("Density counts must be >= 1")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def kde_density(cloud, bandwidth: float = 0.1) -> DensityField:
    """
    Count, for every point, the points (itself included) within `bandwidth`.

    Clouds up to 1024 points use a brute-force pairwise scan; larger clouds
    query a KD-tree. Both paths return the same counts.

    Args:
        cloud: Point cloud of shape (N, 3).
        bandwidth (float): Ball radius.

    Returns:
        DensityField: The per-point counts.
    """
    if bandwidth <= 0:
        raise ValueError(f"Bandwidth must be positive, got {bandwidth}")
    cloud = as_cloud(cloud)
    if len(cloud) <= BRUTE_FORCE_LIMIT:
        diff = cloud[:, None, :] - cloud[None, :, :]
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        counts = np.sum(dist <= bandwidth, axis=1)
    else:
        counts = KDTree(cloud).query_radius(cloud, r=bandwidth, count_only=True)
    return DensityField(counts, float(bandwidth))


def density_cv(field: DensityField) -> float:
    """
    Coefficient of variation (population std over mean) of a density field.
    """
    values = field.values.astype(np.float64)
    return float(values.std() / values.mean())
