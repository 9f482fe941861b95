from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SPLITS = ("train", "validation", "test")


def as_cloud(points) -> np.ndarray:
    """
    Validate and convert points to a float64 array of shape (N, 3).

    Args:
        points: Anything array-like holding N 3-D points.

    Returns:
        np.ndarray: The point cloud.
    """
    cloud = np.asarray(points, dtype=np.float64)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise ValueError(f"Point cloud must have shape (N, 3), got {cloud.shape}")
    if cloud.shape[0] < 1:
        raise ValueError("Point cloud must contain at least one point")
    if not np.isfinite(cloud).all():
        raise ValueError("Point cloud contains non-finite coordinates")
    return cloud


def bbox_diagonal(cloud: np.ndarray) -> float:
    extent = cloud.max(axis=0) - cloud.min(axis=0)
    return float(np.sqrt(np.sum(extent * extent)))


def normalize_cloud(cloud) -> np.ndarray:
    """
    Center a cloud on its centroid and scale it to a unit bounding-box diagonal.

    Args:
        cloud: Point cloud of shape (N, 3).

    Returns:
        np.ndarray: Normalized point cloud.
    """
    cloud = as_cloud(cloud)
    diagonal = bbox_diagonal(cloud)
    if diagonal == 0.0:
        raise ValueError("degenerate cloud")
    centered = cloud - cloud.mean(axis=0)
    return centered / diagonal


@dataclass
class LabeledCloudSet:
    """
    A set of equally sized point clouds with integer labels.

    Attributes:
        clouds: Array of shape (M, N, 3).
        labels: Array of shape (M,) with class ids drawn from label_set.
        split: One of "train", "validation", "test".
        label_set: Declared label ids.
        mesh_ids: Identifier of the source shape of every cloud.
    """
    clouds: np.ndarray
    labels: np.ndarray
    split: str = "train"
    label_set: Sequence[int] = (0, 1)
    mesh_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.clouds = np.asarray(self.clouds, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.clouds.ndim != 3 or self.clouds.shape[-1] != 3:
            raise ValueError(f"Clouds must have shape (M, N, 3), got {self.clouds.shape}")
        if len(self.clouds) != len(self.labels):
            raise ValueError(f"{len(self.clouds)} clouds but {len(self.labels)} labels")
        if self.split not in SPLITS:
            raise ValueError(f"Unknown split: {self.split}")
        unknown = set(self.labels.tolist()) - set(self.label_set)
        if unknown:
            raise ValueError(f"Labels {sorted(unknown)} are not in the label set {list(self.label_set)}")
        if self.mesh_ids and len(self.mesh_ids) != len(self.labels):
            raise ValueError("mesh_ids must match the number of clouds")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def num_points(self) -> int:
        return self.clouds.shape[1]

    def subset(self, indices) -> "LabeledCloudSet":
        indices = np.asarray(indices, dtype=np.int64)
        mesh_ids = [self.mesh_ids[i] for i in indices] if self.mesh_ids else []
        return LabeledCloudSet(self.clouds[indices], self.labels[indices], self.split, self.label_set, mesh_ids)

    @classmethod
    def concatenate(cls, parts: Sequence["LabeledCloudSet"], split: str) -> "LabeledCloudSet":
        label_set = sorted(set().union(*(set(p.label_set) for p in parts)))
        mesh_ids = [m for p in parts for m in (p.mesh_ids or [None] * len(p))]
        return cls(
            clouds=np.concatenate([p.clouds for p in parts]),
            labels=np.concatenate([p.labels for p in parts]),
            split=split,
            label_set=tuple(label_set),
            mesh_ids=mesh_ids,
        )
