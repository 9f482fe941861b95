from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple
import logging

from tqdm import tqdm
import numpy as np

from autodiff import functional as F
from autodiff.optim import Adam
from autodiff.penalty import gradient_penalty
from autodiff.tensor import NumericalError, Tape, Tensor, backward
from dataloaders.dataloader import BatchLoader
from geometry.cloud import LabeledCloudSet
from geometry.sampling import sample_sphere
from models.generators import DeformGenerator
from models.spec import NetworkSpec

from .checkpoint import checkpoint_path, load_checkpoint, save_checkpoint
from .runlog import RunLog
from .trainer import Trainer, TrainingDivergedError, write_diagnostic

log = logging.getLogger(__name__)

GP_MODES = ("gradient-penalty", "weight-clip")
CRITIC_OUTPUTS = ("logit", "sigmoid")
PROFILES = ("paper", "desk")


def generator_inputs(generator, batch_size: int, rng: np.random.Generator):
    """
    Latent codes z ~ N(0, I) and, for a deformation generator, one fresh
    unit-sphere template per code.
    """
    z = rng.standard_normal((batch_size, generator.latent_dim))
    if isinstance(generator, DeformGenerator):
        return z, np.stack([sample_sphere(generator.num_points, rng) for _ in range(batch_size)])
    return z, None


def run_generator(generator, inputs) -> Tensor:
    z, template = inputs
    if template is not None:
        return generator(z, template)
    return generator(z)


def generate_clouds(generator, count: int, rng: np.random.Generator, batch_size: int = 64) -> np.ndarray:
    """
    Draw `count` clouds from a generator in evaluation mode.
    """
    training = generator.training
    generator.eval()
    try:
        parts = [run_generator(generator, generator_inputs(generator, min(batch_size, count - start), rng)).data
                 for start in range(0, count, batch_size)]
    finally:
        generator.train(training)
    return np.concatenate(parts)


@dataclass
class TrainConfig:
    """
    Adversarial training hyperparameters. Defaults are the full-scale recipe of the "paper" profile.

    Attributes:
        lambda_gp: Gradient-penalty weight.
        n_critic: Discriminator updates per generator update.
        lr, betas: Adam hyperparameters shared by both players.
        latent_dim: Size of z ~ N(0, I).
        epochs: Passes of the critic over the real set.
        batch_size: Clouds per critic batch.
        seed: Master seed, filled in from the run when None.
        gp_mode: "gradient-penalty" or "weight-clip".
        clip: Weight-clip bound.
        critic_output: Score fed to the Wasserstein loss, the head logit or its sigmoid.
        checkpoint_every: Epochs between checkpoints, 0 keeps only the final one.
        snapshot_every: Epochs between retained sample snapshots, 0 disables them.
        profile: "paper" or "desk".
    """
    lambda_gp: float = 1.0
    n_critic: int = 10
    lr: float = 1e-4
    betas: Tuple[float, float] = (0.5, 0.999)
    latent_dim: int = 512
    epochs: int = 6000
    batch_size: int = 16
    seed: Optional[int] = None
    gp_mode: str = "gradient-penalty"
    clip: float = 0.01
    critic_output: str = "logit"
    checkpoint_every: int = 0
    snapshot_every: int = 0
    profile: str = "paper"

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if self.gp_mode not in GP_MODES:
            raise ValueError(f"gp_mode: {self.gp_mode} not supported")
        if self.critic_output not in CRITIC_OUTPUTS:
            raise ValueError(f"critic_output: {self.critic_output} not supported")
        if self.profile not in PROFILES:
            raise ValueError(f"Profile: {self.profile} not supported")
        if self.n_critic < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError(f"Invalid schedule: n_critic={self.n_critic}, epochs={self.epochs}, "
                             f"batch_size={self.batch_size}")
        if self.lambda_gp < 0 or self.clip <= 0:
            raise ValueError(f"Invalid regularization: lambda_gp={self.lambda_gp}, clip={self.clip}")


class WGANTrainer(Trainer):
    """
    Alternating Wasserstein training: n_critic critic updates on
    mean(fake) - mean(real) (+ lambda_gp * gradient penalty), then one
    generator update on -mean(fake).

    All randomness (batch order, latent codes, templates, penalty mixing)
    comes from the single `rng` stream, which is checkpointed with the
    weights and optimizer moments.
    """

    def __init__(self, generator, discriminator, data: LabeledCloudSet, config: TrainConfig,
                 rng: np.random.Generator, generator_spec: Optional[NetworkSpec] = None,
                 checkpoint_dir: Optional[str] = None, batch_size: Optional[int] = None):
        batch_size = min(batch_size or config.batch_size, len(data))
        if batch_size < 1:
            raise ValueError("Adversarial training needs at least one real cloud")
        loader = BatchLoader(data, batch_size, shuffle=True, rng=rng, drop_last=True)
        self.generator = generator
        self.generator_spec = generator_spec
        optimizer = Adam(self.generator_parameters(), lr=config.lr, betas=config.betas)
        super().__init__(generator, loader, None, None, None, optimizer, "wgan")
        self.discriminator = discriminator
        self.d_optimizer = Adam(discriminator.parameters(), lr=config.lr, betas=config.betas)
        self.config = config
        self.rng = rng
        self.checkpoint_dir = checkpoint_dir
        self.runlog = RunLog()
        self.epoch = 0
        self.iteration = 0
        self.critic_steps = 0
        self.critic_runs: List[int] = []
        self._last_generator_at = 0

    @property
    def g_optimizer(self):
        return self.optimizer

    def generator_parameters(self) -> Dict[str, np.ndarray]:
        return self.generator.parameters()

    def critic(self, clouds) -> Tensor:
        if self.config.critic_output == "logit":
            return self.discriminator.logits(clouds)
        return self.discriminator(clouds)

    def draw_generator_inputs(self, batch_size: int, rng: Optional[np.random.Generator] = None):
        return generator_inputs(self.generator, batch_size, rng or self.rng)

    def generate(self, inputs) -> Tensor:
        return run_generator(self.generator, inputs)

    def fake_batch(self, batch_size: int) -> np.ndarray:
        return self.generate(self.draw_generator_inputs(batch_size)).data

    def _diverged(self, tape: Optional[Tape], message: str) -> TrainingDivergedError:
        payload = {"iteration": self.iteration, "critic_steps": self.critic_steps, "error": message,
                   "recent": self.runlog.tail()}
        if tape is not None:
            payload["tape"] = tape.to_json()
        path = write_diagnostic(self.checkpoint_dir, payload)
        log.error(f"Training diverged at iteration {self.iteration}: {message}")
        return TrainingDivergedError(message, self.iteration, path)

    def _check_finite(self, tape: Tape, **values) -> None:
        bad = [name for name, value in values.items() if not np.isfinite(value)]
        if bad:
            raise self._diverged(tape, f"non-finite {', '.join(bad)}")

    def critic_step(self, real: np.ndarray) -> Tuple[float, float]:
        """
        One discriminator update on a real batch and a freshly generated batch.

        Returns:
            tuple: The Wasserstein estimate mean(real) - mean(fake) measured
                before the update, and the discriminator loss.
        """
        fake = self.fake_batch(len(real))
        with Tape("critic") as tape:
            params = self.discriminator.bind(tape)
            try:
                wasserstein = F.mean(self.critic(real)) - F.mean(self.critic(fake))
                d_loss = -wasserstein
                if self.config.gp_mode == "gradient-penalty":
                    d_loss = d_loss + self.config.lambda_gp * gradient_penalty(self.critic, real, fake, self.rng)
                grads = backward(tape, d_loss, list(params.values()))
            except NumericalError as e:
                raise self._diverged(tape, str(e)) from e
            finally:
                self.discriminator.unbind()
        self._check_finite(tape, d_loss=d_loss.item(), wasserstein=wasserstein.item())
        self.d_optimizer.step(dict(zip(params.keys(), grads)))
        if self.config.gp_mode == "weight-clip":
            for value in self.discriminator.parameters().values():
                np.clip(value, -self.config.clip, self.config.clip, out=value)
        self.critic_steps += 1
        return wasserstein.item(), d_loss.item()

    def generator_step(self, batch_size: int) -> float:
        inputs = self.draw_generator_inputs(batch_size)
        with Tape("generator") as tape:
            params = self.generator.bind(tape)
            try:
                g_loss = -F.mean(self.critic(self.generate(inputs)))
                grads = backward(tape, g_loss, list(params.values()))
            except NumericalError as e:
                raise self._diverged(tape, str(e)) from e
            finally:
                self.generator.unbind()
        self._check_finite(tape, g_loss=g_loss.item())
        self.g_optimizer.step(dict(zip(params.keys(), grads)))
        return g_loss.item()

    def train(self, current_epoch_nr):
        first_row = len(self.runlog)
        for real, _ in self.train_dataloader:
            wasserstein, d_loss = self.critic_step(real)
            if self.critic_steps - self._last_generator_at < self.config.n_critic:
                continue
            g_loss = self.generator_step(len(real))
            self.iteration += 1
            self.critic_runs.append(self.critic_steps - self._last_generator_at)
            self._last_generator_at = self.critic_steps
            self.runlog.append(self.iteration, wasserstein, d_loss, g_loss)

        rows = self.runlog.rows[first_row:]
        if not rows:
            return {}
        train_metrics = {
            "wasserstein": float(np.mean([r.wasserstein for r in rows])),
            "d_loss": float(np.mean([r.d_loss for r in rows])),
            "g_loss": float(np.mean([r.g_loss for r in rows])),
        }
        self.log_metrics(train_metrics, current_epoch_nr, 'train')
        return train_metrics

    def evaluate(self, current_epoch_nr):
        return {}

    def test(self):
        if not self.runlog.rows:
            return {}
        last = self.runlog.rows[-1]
        test_metrics = {"wasserstein": last.wasserstein, "d_loss": last.d_loss, "g_loss": last.g_loss}
        self.log_metrics(test_metrics, self.epoch, 'test')
        return test_metrics

    def snapshot(self, current_epoch_nr: int) -> None:
        pass

    def fit(self) -> RunLog:
        """
        Train from the current epoch (0, or the resumed one) up to config.epochs,
        checkpointing every config.checkpoint_every epochs and at the end.
        """
        loop = tqdm(range(self.epoch + 1, self.config.epochs + 1), leave=False)
        for epoch in loop:
            train_metrics = self.train(epoch)
            self.epoch = epoch
            loop.set_description(f'Epoch {epoch}')
            if train_metrics:
                loop.set_postfix(w=round(train_metrics["wasserstein"], 4), d_loss=round(train_metrics["d_loss"], 4))
            if self.config.snapshot_every and epoch % self.config.snapshot_every == 0:
                self.snapshot(epoch)
            if self.checkpoint_dir and self.config.checkpoint_every and epoch % self.config.checkpoint_every == 0:
                self.save(checkpoint_path(self.checkpoint_dir, epoch))
        if self.checkpoint_dir and not (self.config.checkpoint_every and self.epoch % self.config.checkpoint_every == 0):
            self.save(checkpoint_path(self.checkpoint_dir, self.epoch))
        return self.runlog

    def networks(self) -> Dict[str, tuple]:
        if self.generator_spec is None:
            raise ValueError("Checkpointing needs the generator spec")
        return {"generator": (self.generator_spec, self.generator),
                "discriminator": (self.discriminator.spec, self.discriminator)}

    def optimizers(self) -> Dict[str, object]:
        return {"generator": self.g_optimizer, "discriminator": self.d_optimizer}

    def arrays(self) -> Dict[str, np.ndarray]:
        return {}

    def load_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        pass

    def state(self) -> dict:
        return {"epoch": self.epoch, "iteration": self.iteration, "critic_steps": self.critic_steps,
                "last_generator_at": self._last_generator_at, "critic_runs": list(self.critic_runs)}

    def save(self, directory: str) -> str:
        self.runlog.add_checkpoint(directory)
        return save_checkpoint(directory, self.networks(), self.optimizers(), {"training": self.rng}, self.runlog,
                               self.state(), self.arrays())

    def resume(self, directory: str) -> int:
        """
        Restore weights, optimizer moments, the random stream, counters and
        the RunLog from a checkpoint; `fit` then continues the same trajectory.

        Returns:
            int: The epoch the checkpoint was taken at.
        """
        checkpoint = load_checkpoint(directory)
        for name, (spec, network) in self.networks().items():
            blob = checkpoint.networks[name]
            if blob.fingerprint != spec.fingerprint():
                raise ValueError(f"Checkpoint {directory} holds a different {name} ({blob.spec.kind})")
            network.load_state_dict(blob.tensors)
        for name, optimizer in self.optimizers().items():
            optimizer.load_state_dict(checkpoint.optimizers[name])
        self.rng.bit_generator.state = checkpoint.rngs["training"]
        self.runlog = checkpoint.runlog
        self.runlog.add_checkpoint(directory)
        state = checkpoint.state
        self.epoch = int(state["epoch"])
        self.iteration = int(state["iteration"])
        self.critic_steps = int(state["critic_steps"])
        self._last_generator_at = int(state["last_generator_at"])
        self.critic_runs = [int(n) for n in state["critic_runs"]]
        self.load_arrays(checkpoint.arrays)
        log.info(f"Resumed from {directory} at epoch {self.epoch}")
        return self.epoch

    def samples(self, count: int, rng: np.random.Generator, batch_size: int = 64) -> np.ndarray:
        return generate_clouds(self.generator, count, rng, batch_size)
