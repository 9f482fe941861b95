from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from autodiff.tensor import Tensor

from .linalg import jacobi_eigh, root_from_eigen

COVARIANCE_REGULARIZER = 1e-6
EIGENVALUE_FLOOR = -1e-9


@dataclass(frozen=True)
class GaussianStats:
    """
    Mean vector, covariance matrix and sample count of a feature population.

    The covariance must be symmetric and positive semi-definite up to an
    eigenvalue floor of -1e-9; its eigendecomposition is kept for `frechet`.
    """
    mean: np.ndarray
    cov: np.ndarray
    count: int
    eigen: Tuple[np.ndarray, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
        if cov.shape != (len(mean), len(mean)):
            raise ValueError(f"Covariance {cov.shape} does not match mean of size {len(mean)}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(cov).max()))):
            raise ValueError("Covariance is not symmetric")
        values, vectors = jacobi_eigh(cov)
        if len(values) and values[0] < EIGENVALUE_FLOOR:
            raise ValueError(f"Covariance is not positive semi-definite (smallest eigenvalue {values[0]:.3e})")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "eigen", (values, vectors))

    @property
    def dim(self) -> int:
        return len(self.mean)


def gaussian_stats(features, regularizer: float = COVARIANCE_REGULARIZER) -> GaussianStats:
    """
    Mean and unbiased (n - 1) covariance of feature rows, plus regularizer * I.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or len(features) < 2:
        raise ValueError(f"Need at least 2 feature rows, got shape {features.shape}")
    cov = np.atleast_2d(np.cov(features, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T) + regularizer * np.eye(features.shape[1])
    return GaussianStats(features.mean(axis=0), cov, len(features))


def extract_features(clouds, extractor, batch_size: int = 32) -> np.ndarray:
    """
    Pooled global features of a set of clouds, computed in evaluation mode.
    """
    clouds = np.asarray(clouds, dtype=np.float64)
    training = extractor.training
    extractor.eval()
    try:
        parts = []
        for start in range(0, len(clouds), batch_size):
            feature = extractor.features(Tensor(clouds[start:start + batch_size]))
            parts.append(np.array(feature.data))
    finally:
        extractor.train(training)
    return np.concatenate(parts)


def feature_stats(clouds, extractor, batch_size: int = 32) -> GaussianStats:
    """
    Gaussian statistics of the extractor's global features over a cloud set.

    Args:
        clouds: Array (M, N, 3) with M >= 2.
        extractor: Network exposing `features(batch)`.
        batch_size (int): Clouds per forward pass.

    Returns:
        GaussianStats: Regularized statistics.
    """
    if len(clouds) < 2:
        raise ValueError(f"feature_stats needs at least 2 clouds, got {len(clouds)}")
    return gaussian_stats(extract_features(clouds, extractor, batch_size))


def frechet(s1: GaussianStats, s2: GaussianStats) -> float:
    """
    Frechet distance between two Gaussians:
    ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)).

    The trace of (S1 S2)^(1/2) is taken as the trace of the symmetric square
    root of sqrt(S1) S2 sqrt(S1); eigenvalues are clamped at 0 and so is the
    result.
    """
    if s1.dim != s2.dim:
        raise ValueError(f"Dimension mismatch: {s1.dim} vs {s2.dim}")
    diff = s1.mean - s2.mean
    root1 = root_from_eigen(*s1.eigen)
    inner = root1 @ s2.cov @ root1
    values, _ = jacobi_eigh(0.5 * (inner + inner.T))
    trace_sqrt = float(np.sum(np.sqrt(np.clip(values, 0.0, None))))
    value = float(diff @ diff + np.trace(s1.cov) + np.trace(s2.cov) - 2.0 * trace_sqrt)
    return max(value, 0.0)
