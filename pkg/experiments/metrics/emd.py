import logging

import numpy as np
from scipy.optimize import linear_sum_assignment

from geometry.cloud import as_cloud

from .distances import squared_distances
from .linalg import ConvergenceError

log = logging.getLogger(__name__)

EXACT_LIMIT = 1024
AUCTION_MAX_ROUNDS = 1_000_000
SCALING_FACTOR = 5.0


def _matched(a, b):
    a, b = as_cloud(a), as_cloud(b)
    if len(a) != len(b):
        raise ValueError(f"EMD needs equally sized clouds, got {len(a)} and {len(b)}")
    return a, b


def emd_exact(a, b) -> float:
    """
    Earth Mover's distance: minimum over bijections of the mean Euclidean
    matching cost, solved exactly as an assignment problem.

    Raises:
        ValueError: On a size mismatch or more than 1024 points (use emd_approx).
    """
    a, b = _matched(a, b)
    if len(a) > EXACT_LIMIT:
        raise ValueError(f"emd_exact is capped at {EXACT_LIMIT} points, got {len(a)}; use emd_approx")
    cost = np.sqrt(squared_distances(a, b))
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def _auction_phase(benefit: np.ndarray, prices: np.ndarray, eps: float, budget: int):
    """
    One Jacobi auction at fixed eps. Unassigned persons bid at once; each
    object takes its highest bid, lower bidder index on ties.
    """
    n = len(benefit)
    owner = np.full(n, -1)
    assigned = np.full(n, -1)
    rounds = 0
    while True:
        bidders = np.flatnonzero(assigned < 0)
        if len(bidders) == 0:
            return assigned, rounds
        rounds += 1
        if rounds > budget:
            raise ConvergenceError(f"Auction did not converge within {AUCTION_MAX_ROUNDS} bidding rounds")
        values = benefit[bidders] - prices
        rows = np.arange(len(bidders))
        best = np.argmax(values, axis=1)
        v1 = values[rows, best]
        if n > 1:
            values[rows, best] = -np.inf
            v2 = values.max(axis=1)
        else:
            v2 = v1
        bids = prices[best] + (v1 - v2) + eps

        order = np.lexsort((-bids, best))
        objects = best[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = objects[1:] != objects[:-1]
        winners = order[first]
        won = best[winners]

        previous = owner[won]
        assigned[previous[previous >= 0]] = -1
        owner[won] = bidders[winners]
        assigned[bidders[winners]] = won
        prices[won] = bids[winners]


def emd_approx(a, b, epsilon: float = 1e-3) -> float:
    """
    EMD from an eps-scaling auction.

    The final phase runs at eps = epsilon * c_max / N, where c_max is the
    largest pairwise distance, so the returned mean cost is at least the
    exact EMD and exceeds it by at most epsilon * c_max / N.

    Raises:
        ConvergenceError: When the bidding rounds exceed the cap.
    """
    a, b = _matched(a, b)
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if np.array_equal(a, b):
        return 0.0
    cost = np.sqrt(squared_distances(a, b))
    n = len(a)
    c_max = float(cost.max())
    if c_max == 0.0:
        return 0.0
    benefit = -cost
    prices = np.zeros(n)
    final = epsilon * c_max / n
    eps = max(c_max / SCALING_FACTOR, final)
    budget = AUCTION_MAX_ROUNDS
    while True:
        assigned, rounds = _auction_phase(benefit, prices, eps, budget)
        budget -= rounds
        if eps <= final:
            break
        eps = max(eps / SCALING_FACTOR, final)
    log.debug("Auction used %d bidding rounds", AUCTION_MAX_ROUNDS - budget)
    return float(cost[np.arange(n), assigned].mean())


def emd(a, b, epsilon: float = 1e-3) -> float:
    """
    Exact EMD up to 1024 points, auction beyond.
    """
    if len(a) <= EXACT_LIMIT:
        return emd_exact(a, b)
    return emd_approx(a, b, epsilon)
