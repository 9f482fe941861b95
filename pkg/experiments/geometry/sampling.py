import logging
from typing import Union

import numpy as np

from .cloud import as_cloud
from .mesh import TriangleMesh

log = logging.getLogger(__name__)

MAX_REJECTION_ROUNDS = 1000


def _barycentric_points(triangles: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    r1 = np.sqrt(rng.random(len(triangles)))
    r2 = rng.random(len(triangles))
    u = (1.0 - r1)[:, None]
    v = (r1 * (1.0 - r2))[:, None]
    w = (r1 * r2)[:, None]
    return u * triangles[:, 0] + v * triangles[:, 1] + w * triangles[:, 2]


def _sample_faces(triangles: np.ndarray, areas: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    chosen = rng.choice(len(triangles), size=n, p=areas / areas.sum())
    return _barycentric_points(triangles[chosen], rng)


def sample_mesh_uniform(mesh: TriangleMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Sample points uniformly over the surface of a mesh.

    Triangles are chosen with probability proportional to their area and
    points are placed with uniform barycentric coordinates.

    Args:
        mesh (TriangleMesh): Source mesh.
        n (int): Number of points.
        rng (np.random.Generator): Random stream.

    Returns:
        np.ndarray: Cloud of shape (n, 3).
    """
    if n < 1:
        raise ValueError(f"Number of points must be >= 1, got {n}")
    return _sample_faces(mesh.triangles, mesh.face_areas, n, rng)


def sample_fps(cloud, k: int, start: Union[int, np.random.Generator] = 0, return_indices: bool = False):
    """
    Greedy farthest point sampling.

    Each new point maximizes the distance to the already selected set; ties go
    to the lowest index.

    Args:
        cloud: Point cloud of shape (N, 3).
        k (int): Number of points to keep.
        start: Index of the first point, or a random stream to draw it from.
        return_indices (bool): Also return the selected indices.

    Returns:
        np.ndarray: Selected points of shape (k, 3) (and their indices).
    """
    cloud = as_cloud(cloud)
    n = len(cloud)
    if not 1 <= k <= n:
        raise ValueError(f"FPS needs 1 <= k <= N, got k={k}, N={n}")
    if isinstance(start, np.random.Generator):
        start = int(start.integers(n))
    if not 0 <= start < n:
        raise ValueError(f"Start index {start} out of range for {n} points")

    selected = np.empty(k, dtype=np.int64)
    selected[0] = start
    diff = cloud - cloud[start]
    min_dist = np.sum(diff * diff, axis=1)
    for i in range(1, k):
        nxt = int(np.argmax(min_dist))
        selected[i] = nxt
        diff = cloud - cloud[nxt]
        np.minimum(min_dist, np.sum(diff * diff, axis=1), out=min_dist)

    if return_indices:
        return cloud[selected], selected
    return cloud[selected]


def sample_biased_cluster(mesh: TriangleMesh, n_uniform: int = 1024, n_cluster: int = 1024, radius: float = 0.1,
                          rng: np.random.Generator = None, return_anchor: bool = False):
    """
    Uniform surface sample plus a dense cluster around one surface anchor.

    The cluster points are uniform over the part of the surface lying within
    `radius` of the anchor, obtained by rejection of uniform surface samples.

    Args:
        mesh (TriangleMesh): Source mesh.
        n_uniform (int): Number of uniformly sampled points.
        n_cluster (int): Number of clustered points.
        radius (float): Cluster radius.
        rng (np.random.Generator): Random stream.
        return_anchor (bool): Also return the anchor point.

    Returns:
        np.ndarray: Cloud of shape (n_uniform + n_cluster, 3) (and the anchor).
    """
    if rng is None:
        raise ValueError("sample_biased_cluster needs an explicit random stream")
    if n_uniform < 0 or n_cluster < 0 or n_uniform + n_cluster < 1:
        raise ValueError(f"Invalid point counts: n_uniform={n_uniform}, n_cluster={n_cluster}")
    if radius <= 0:
        raise ValueError(f"Cluster radius must be positive, got {radius}")

    parts = [sample_mesh_uniform(mesh, n_uniform, rng)] if n_uniform else []
    anchor = sample_mesh_uniform(mesh, 1, rng)[0]

    if n_cluster:
        triangles = mesh.triangles
        centroids = triangles.mean(axis=1)
        reach = np.max(np.linalg.norm(triangles - centroids[:, None, :], axis=2), axis=1)
        near = np.linalg.norm(centroids - anchor, axis=1) <= radius + reach
        candidates, areas = triangles[near], mesh.face_areas[near]

        cluster, collected = [], 0
        for _ in range(MAX_REJECTION_ROUNDS):
            proposals = _sample_faces(candidates, areas, max(4 * (n_cluster - collected), 64), rng)
            accepted = proposals[np.linalg.norm(proposals - anchor, axis=1) <= radius]
            cluster.append(accepted)
            collected += len(accepted)
            if collected >= n_cluster:
                break
        else:
            raise RuntimeError("Rejection sampling around the cluster anchor did not converge")
        parts.append(np.concatenate(cluster)[:n_cluster])

    cloud = np.concatenate(parts)
    if return_anchor:
        return cloud, anchor
    return cloud


def sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Uniform points on the unit sphere from normalized 3-D Gaussian draws.
    """
    if n < 1:
        raise ValueError(f"Number of points must be >= 1, got {n}")
    points = rng.standard_normal((n, 3))
    norms = np.linalg.norm(points, axis=1, keepdims=True)
    while np.any(norms == 0.0):
        zero = norms[:, 0] == 0.0
        points[zero] = rng.standard_normal((int(zero.sum()), 3))
        norms = np.linalg.norm(points, axis=1, keepdims=True)
    return points / norms
