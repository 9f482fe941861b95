import logging
from typing import Tuple

import numpy as np

log = logging.getLogger(__name__)

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 100


class ConvergenceError(RuntimeError):
    pass


def _round_robin(m: int):
    """
    Rounds of disjoint index pairs covering every pair once (circle method).
    """
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        half = m // 2
        rounds.append((np.array(players[:half]), np.array(players[::-1][:half])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _off_norm(a: np.ndarray) -> float:
    return float(np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0)))


def jacobi_eigh(matrix, tol: float = JACOBI_TOLERANCE, max_sweeps: int = JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Every sweep visits all index pairs in round-robin rounds of disjoint
    pairs, and the rotations of one round are applied together. Iteration
    stops when the off-diagonal Frobenius norm drops below
    tol * max(1, ||A||_F).

    Args:
        matrix: Symmetric (d, d) array.
        tol (float): Relative off-diagonal tolerance.
        max_sweeps (int): Sweep limit.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Ascending eigenvalues and the matching
        eigenvectors as columns.

    Raises:
        ConvergenceError: When the tolerance is not met within max_sweeps.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("Matrix has non-finite entries")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    m = n + (n % 2)
    if m != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))
    rounds = _round_robin(m) if m > 1 else []

    for sweep in range(max_sweeps + 1):
        if _off_norm(a) < threshold:
            break
        if sweep == max_sweeps:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {_off_norm(a):.3e})")
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            app, aqq = a[p, p], a[q, q]
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    log.debug("Jacobi converged for d=%d", n)

    values, vectors = np.diag(a)[:n], v[:n, :n]
    order = np.argsort(values, kind="stable")
    return values[order], vectors[:, order]


def root_from_eigen(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def sqrtm_psd(matrix) -> np.ndarray:
    """
    Symmetric square root with eigenvalues clamped at 0.
    """
    return root_from_eigen(*jacobi_eigh(matrix))
