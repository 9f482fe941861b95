import numpy as np

from geometry.cloud import as_cloud

CHUNK_ROWS = 512


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Exact squared Euclidean distances (|A|, |B|) from coordinate differences.
    """
    diff = a[:, None, :] - b[None, :, :]
    return np.sum(diff * diff, axis=-1)


def nearest_squared(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    For every point of `a`, the squared distance to its nearest point in `b`.
    """
    out = np.empty(len(a))
    for start in range(0, len(a), CHUNK_ROWS):
        out[start:start + CHUNK_ROWS] = squared_distances(a[start:start + CHUNK_ROWS], b).min(axis=1)
    return out


def chamfer(a, b) -> float:
    """
    Chamfer distance: mean squared nearest-neighbour distance from A to B plus
    the same from B to A.

    Args:
        a: Point cloud (N, 3).
        b: Point cloud (M, 3).

    Returns:
        float: The distance.
    """
    a, b = as_cloud(a), as_cloud(b)
    return float(np.mean(nearest_squared(a, b)) + np.mean(nearest_squared(b, a)))
