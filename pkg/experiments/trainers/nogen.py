from typing import Dict, List, Optional, Tuple
import logging

import numpy as np

from autodiff import functional as F
from autodiff.tensor import NumericalError, Tape, backward
from geometry.cloud import LabeledCloudSet

from .wgan import TrainConfig, WGANTrainer

log = logging.getLogger(__name__)

INIT_STD = 0.1


def init_learnable_clouds(count: int, num_points: int, rng: np.random.Generator, std: float = INIT_STD) -> np.ndarray:
    """
    i.i.d. Gaussian N(0, std) coordinates for `count` clouds of `num_points` points.
    """
    if count < 1 or num_points < 1:
        raise ValueError(f"Need at least one learnable cloud with one point, got {count} x {num_points}")
    return rng.normal(0.0, std, size=(count, num_points, 3))


class NoGeneratorTrainer(WGANTrainer):
    """
    Adversarial training without a generator: critic gradients move the
    coordinates of a fixed set of learnable clouds directly.

    The critic step is the WGAN one with fakes drawn from the learnable set;
    the "generator" step is one Adam update of every learnable cloud on
    -mean(critic(clouds)).
    """

    def __init__(self, discriminator, data: LabeledCloudSet, num_clouds: int, config: TrainConfig,
                 rng: np.random.Generator, init_rng: Optional[np.random.Generator] = None,
                 checkpoint_dir: Optional[str] = None):
        self.clouds = init_learnable_clouds(num_clouds, data.num_points, init_rng or rng)
        self.snapshots: List[Tuple[int, np.ndarray]] = [(0, self.clouds.copy())]
        super().__init__(None, discriminator, data, config, rng, checkpoint_dir=checkpoint_dir,
                         batch_size=min(config.batch_size, num_clouds))

    def generator_parameters(self) -> Dict[str, np.ndarray]:
        return {"clouds": self.clouds}

    def fake_batch(self, batch_size: int) -> np.ndarray:
        index = np.sort(self.rng.choice(len(self.clouds), size=batch_size, replace=False))
        return self.clouds[index].copy()

    def cloud_gradient(self) -> Tuple[float, np.ndarray]:
        """
        Loss -mean(critic(clouds)) over the whole learnable set and its
        gradient with respect to every coordinate.
        """
        count = len(self.clouds)
        grad = np.zeros_like(self.clouds)
        loss = 0.0
        for start in range(0, count, self.train_dataloader.batch_size):
            stop = min(start + self.train_dataloader.batch_size, count)
            with Tape("clouds") as tape:
                try:
                    x = tape.watch(self.clouds[start:stop])
                    chunk_loss = -F.sum(self.critic(x)) / count
                    (chunk_grad,) = backward(tape, chunk_loss, [x])
                except NumericalError as e:
                    raise self._diverged(tape, str(e)) from e
            grad[start:stop] = chunk_grad.data
            loss += chunk_loss.item()
        return loss, grad

    def generator_step(self, batch_size: int) -> float:
        g_loss, grad = self.cloud_gradient()
        self._check_finite(None, g_loss=g_loss)
        self.g_optimizer.step({"clouds": grad})
        return g_loss

    def snapshot(self, current_epoch_nr: int) -> None:
        self.snapshots.append((current_epoch_nr, self.clouds.copy()))

    def networks(self) -> Dict[str, tuple]:
        return {"discriminator": (self.discriminator.spec, self.discriminator)}

    def optimizers(self) -> Dict[str, object]:
        return {"clouds": self.g_optimizer, "discriminator": self.d_optimizer}

    def arrays(self) -> Dict[str, np.ndarray]:
        return {"clouds": self.clouds}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        if "clouds" not in arrays or arrays["clouds"].shape != self.clouds.shape:
            raise ValueError(f"Checkpoint does not hold learnable clouds of shape {self.clouds.shape}")
        self.clouds[...] = arrays["clouds"]
        self.snapshots = [(self.epoch, self.clouds.copy())]

    def samples(self, count: int, rng: np.random.Generator, batch_size: int = 64) -> np.ndarray:
        if count > len(self.clouds):
            raise ValueError(f"Only {len(self.clouds)} learnable clouds, {count} requested")
        return self.clouds[:count].copy()
