import logging
from typing import Dict

import numpy as np
from joblib import Parallel, delayed

from .distances import chamfer
from .emd import emd

log = logging.getLogger(__name__)

DISTANCES = {"cd": chamfer, "emd": emd}


def _distance_row(cloud, ref, dist) -> np.ndarray:
    return np.array([dist(cloud, r) for r in ref])


def pairwise_distances(gen, ref, dist: str = "cd", n_jobs: int = 1) -> np.ndarray:
    """
    Distance matrix (|gen|, |ref|) between two cloud sets.

    Rows are computed independently (optionally by joblib workers) and
    stacked in order, so the result does not depend on n_jobs.
    """
    if dist not in DISTANCES:
        raise ValueError(f"Distance: {dist} not supported")
    if len(gen) == 0 or len(ref) == 0:
        raise ValueError("Cloud sets must be non-empty")
    fn = DISTANCES[dist]
    if n_jobs == 1:
        rows = [_distance_row(g, ref, fn) for g in gen]
    else:
        rows = Parallel(n_jobs=n_jobs)(delayed(_distance_row)(g, ref, fn) for g in gen)
    return np.vstack(rows)


def mmd_from_matrix(matrix: np.ndarray) -> float:
    return float(np.mean(matrix.min(axis=0)))


def coverage_from_matrix(matrix: np.ndarray) -> float:
    matched = np.unique(np.argmin(matrix, axis=1))
    return 100.0 * len(matched) / matrix.shape[1]


def mmd(gen, ref, dist: str = "cd", n_jobs: int = 1) -> float:
    """
    Minimum matching distance: mean over reference clouds of the distance to
    the nearest generated cloud.
    """
    return mmd_from_matrix(pairwise_distances(gen, ref, dist, n_jobs))


def coverage(gen, ref, dist: str = "cd", n_jobs: int = 1) -> float:
    """
    Percentage of reference clouds that are the nearest reference of at least
    one generated cloud.
    """
    return coverage_from_matrix(pairwise_distances(gen, ref, dist, n_jobs))


def set_metrics(gen, ref, n_jobs: int = 1) -> Dict[str, float]:
    """
    MMD and coverage under both CD and EMD, sharing one matrix per distance.
    """
    out = {}
    for dist in ("cd", "emd"):
        matrix = pairwise_distances(gen, ref, dist, n_jobs)
        out[f"mmd_{dist}"] = mmd_from_matrix(matrix)
        out[f"cov_{dist}"] = coverage_from_matrix(matrix)
    return out
