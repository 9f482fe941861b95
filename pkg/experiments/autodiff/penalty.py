from typing import Callable

import numpy as np

from . import functional as F
from .tensor import AutodiffError, Tensor, active_tape, backward


def gradient_penalty(critic: Callable[[Tensor], Tensor], real, fake, rng: np.random.Generator) -> Tensor:
    """
    WGAN-gp penalty: mean over the batch of (||grad_x D(x_hat)|| - 1)^2.

    x_hat = eps * real + (1 - eps) * fake with eps ~ U(0, 1) drawn per sample.
    The input gradient is taken with create_graph, so the penalty can be
    differentiated with respect to any critic weights bound on the active tape.

    Args:
        critic: Maps a (B, N, 3) batch to (B,) scores.
        real: Real batch (B, N, 3).
        fake: Fake batch (B, N, 3); gradients do not flow into it.
        rng (np.random.Generator): Stream for eps.

    Returns:
        Tensor: Scalar penalty.
    """
    tape = active_tape()
    if tape is None:
        raise AutodiffError("gradient_penalty needs an active tape")
    real = np.asarray(getattr(real, "data", real), dtype=np.float64)
    fake = np.asarray(getattr(fake, "data", fake), dtype=np.float64)
    if real.shape != fake.shape:
        raise ValueError(f"Real batch {real.shape} and fake batch {fake.shape} differ")

    eps = rng.random(len(real)).reshape((-1,) + (1,) * (real.ndim - 1))
    x_hat = tape.watch(eps * real + (1.0 - eps) * fake)
    scores = critic(x_hat)
    (grad,) = backward(tape, F.sum(scores), [x_hat], create_graph=True)
    flat = F.reshape(grad, (len(real), -1))
    norms = F.sqrt(F.sum(flat * flat, axis=1) + 1e-12)
    return F.mean((norms - 1.0) ** 2)
