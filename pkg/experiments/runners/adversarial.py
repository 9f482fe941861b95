from typing import Dict, Mapping, Optional, Sequence, Tuple
import logging
import os

import numpy as np

from dataloaders.clouds import REAL, CloudDirectoryDataloader, build_shape_set, write_cloud_dir
from geometry.cloud import LabeledCloudSet
from geometry.density import density_cv, kde_density
from geometry.io import density_colors, write_ply
from metrics.report import evaluate_sets, write_reports_csv, write_reports_json
from models.networks import init_network
from models.spec import NetworkSpec
from trainers.checkpoint import latest_checkpoint
from trainers.nogen import NoGeneratorTrainer
from trainers.runlog import RunLog
from trainers.wgan import TrainConfig, WGANTrainer
from utils.plots import plot_wasserstein
from utils.utils import seed_streams

from .report import ExperimentReport

log = logging.getLogger(__name__)


def real_set(clouds: np.ndarray, names: Optional[Sequence[str]] = None) -> LabeledCloudSet:
    return LabeledCloudSet(clouds, np.full(len(clouds), REAL), "train", (REAL,), list(names or []))


def real_data(shape_class: str, count: int, num_points: int, seed: int,
              data_dir: Optional[str] = None) -> LabeledCloudSet:
    """
    Real training clouds: a gen-data directory when given, fresh procedural
    samples of `shape_class` otherwise. Directory labels are ignored.
    """
    if data_dir:
        loaded = CloudDirectoryDataloader(data_dir).load()
        if loaded.num_points != num_points:
            raise ValueError(f"{data_dir} holds {loaded.num_points}-point clouds, the run needs {num_points}")
        log.info(f"Loaded {len(loaded)} real clouds from {data_dir}")
        return real_set(loaded.clouds, loaded.mesh_ids)
    clouds, meshes = build_shape_set(shape_class, count, num_points, seed_streams(seed, ["data"])["data"])
    return real_set(clouds, [m.mesh_id for m in meshes])


def median_density_cv(clouds: np.ndarray, bandwidth: float = 0.1) -> float:
    return float(np.median([density_cv(kde_density(c, bandwidth)) for c in clouds]))


def _summary(runlog: RunLog, critic_runs: Sequence[int]) -> Dict[str, float]:
    frame = runlog.to_frame()
    if frame.empty:
        return {"iterations": 0}
    return {
        "iterations": int(frame["iteration"].iloc[-1]),
        "final_wasserstein": float(frame["wasserstein"].iloc[-1]),
        "median_wasserstein": float(frame["wasserstein"].median()),
        "final_d_loss": float(frame["d_loss"].iloc[-1]),
        "final_g_loss": float(frame["g_loss"].iloc[-1]),
        "critic_steps_per_update": sorted(set(int(n) for n in critic_runs)),
    }


def _resume_latest(trainer: WGANTrainer) -> None:
    path = latest_checkpoint(trainer.checkpoint_dir)
    if path is None:
        log.info(f"No checkpoint under {trainer.checkpoint_dir}, starting from scratch")
    else:
        trainer.resume(path)


def train_gan(gen_spec: NetworkSpec, disc_spec: NetworkSpec, data: LabeledCloudSet, config: TrainConfig, seed: int,
              output_dir: Optional[str] = None, resume: bool = False, num_samples: int = 0,
              run_config: Optional[dict] = None) -> Tuple[ExperimentReport, RunLog, WGANTrainer]:
    """
    Wasserstein GAN training of one generator against one discriminator.

    Args:
        gen_spec (NetworkSpec): fc-generator or deform-generator.
        disc_spec (NetworkSpec): Any discriminator kind.
        data (LabeledCloudSet): Normalized real clouds.
        config (TrainConfig): Training recipe.
        seed (int): Master seed ("init", "training" and "eval" streams).
        output_dir: Run directory for checkpoints, the RunLog and samples.
        resume (bool): Continue from the latest checkpoint under output_dir.
        num_samples (int): Generated clouds written for evaluation.
        run_config: Configuration recorded in the report.

    Returns:
        tuple: Report, RunLog and the trainer (holding the trained networks).
    """
    if not gen_spec.is_generator or not disc_spec.is_discriminator:
        raise ValueError(f"train_gan needs a generator and a discriminator, got {gen_spec.kind} and {disc_spec.kind}")
    if gen_spec.num_points != data.num_points:
        raise ValueError(f"Generator emits {gen_spec.num_points} points but the real clouds have {data.num_points}")
    if gen_spec.latent_dim != config.latent_dim:
        raise ValueError(f"Generator latent size {gen_spec.latent_dim} differs from config {config.latent_dim}")

    streams = seed_streams(seed, ["init", "training", "eval"])
    generator = init_network(gen_spec, streams["init"])
    discriminator = init_network(disc_spec, streams["init"])
    checkpoint_dir = os.path.join(output_dir, "checkpoints") if output_dir else None
    trainer = WGANTrainer(generator, discriminator, data, config, streams["training"], generator_spec=gen_spec,
                          checkpoint_dir=checkpoint_dir)
    if resume:
        _resume_latest(trainer)
    runlog = trainer.fit()
    trainer.test()

    report = ExperimentReport("gan", seed, dict(run_config or {}))
    report.results[f"{gen_spec.kind}+{disc_spec.kind}"] = _summary(runlog, trainer.critic_runs)
    if output_dir:
        report.artifacts["runlog"] = runlog.write_csv(os.path.join(output_dir, "runlog.csv"))
        report.artifacts["checkpoint"] = runlog.checkpoints[-1] if runlog.checkpoints else ""
        if num_samples:
            samples = trainer.samples(num_samples, streams["eval"])
            names = [f"sample-{i:05d}" for i in range(len(samples))]
            write_cloud_dir(os.path.join(output_dir, "samples"), samples, names)
            report.artifacts["samples"] = os.path.join(output_dir, "samples")
    return report, runlog, trainer


def no_generator_train(disc_spec: NetworkSpec, data: LabeledCloudSet, num_clouds: int, config: TrainConfig,
                       seed: int, output_dir: Optional[str] = None, resume: bool = False, snapshot_clouds: int = 4,
                       run_config: Optional[dict] = None) -> Tuple[ExperimentReport, RunLog, np.ndarray]:
    """
    Adversarial training of `num_clouds` learnable clouds against one discriminator.

    Snapshots (every config.snapshot_every epochs) are written as
    density-colored PLY files for the first `snapshot_clouds` clouds.

    Returns:
        tuple: Report, RunLog and the final learnable clouds.
    """
    if not disc_spec.is_discriminator:
        raise ValueError(f"Kind: {disc_spec.kind} is not a discriminator")
    streams = seed_streams(seed, ["init", "training"])
    discriminator = init_network(disc_spec, streams["init"])
    checkpoint_dir = os.path.join(output_dir, "checkpoints") if output_dir else None
    trainer = NoGeneratorTrainer(discriminator, data, num_clouds, config, streams["training"],
                                 init_rng=streams["init"], checkpoint_dir=checkpoint_dir)
    if resume:
        _resume_latest(trainer)
    runlog = trainer.fit()
    trainer.test()

    report = ExperimentReport("nogen", seed, dict(run_config or {}))
    report.results[disc_spec.kind] = _summary(runlog, trainer.critic_runs)
    if output_dir:
        report.artifacts["runlog"] = runlog.write_csv(os.path.join(output_dir, "runlog.csv"))
        names = [f"cloud-{i:05d}" for i in range(len(trainer.clouds))]
        write_cloud_dir(os.path.join(output_dir, "clouds"), trainer.clouds, names)
        report.artifacts["clouds"] = os.path.join(output_dir, "clouds")
        for epoch, clouds in trainer.snapshots:
            directory = os.path.join(output_dir, "snapshots", f"epoch-{epoch:05d}")
            os.makedirs(directory, exist_ok=True)
            for i in range(min(snapshot_clouds, len(clouds))):
                write_ply(os.path.join(directory, f"cloud-{i:03d}.ply"), clouds[i],
                          density_colors(kde_density(clouds[i])))
        report.artifacts["snapshots"] = os.path.join(output_dir, "snapshots")
    return report, runlog, trainer.clouds.copy()


def _evaluate(results: Dict[str, dict], reports: Dict, name: str, clouds: np.ndarray, ref: np.ndarray,
              extractors: Optional[Mapping[str, object]], n_jobs: int) -> None:
    results[name]["density_cv"] = median_density_cv(clouds)
    if extractors:
        reports[name] = evaluate_sets(clouds, ref, extractors, n_jobs=n_jobs)
        results[name]["metrics"] = reports[name].to_row()


def _write_outputs(report: ExperimentReport, reports: Dict, logs: Dict[str, RunLog], output_dir: Optional[str],
                   title: str) -> None:
    if not output_dir:
        return
    if reports:
        write_reports_csv(reports, os.path.join(output_dir, "metrics.csv"))
        write_reports_json(reports, os.path.join(output_dir, "metrics.json"))
        report.artifacts["metrics"] = os.path.join(output_dir, "metrics.csv")
    report.artifacts["wasserstein_plot"] = plot_wasserstein(
        {name: runlog.to_frame() for name, runlog in logs.items()},
        os.path.join(output_dir, "wasserstein.png"), title)


def nogen_experiment(discriminators: Sequence[NetworkSpec], config: TrainConfig, shape_class: str = "chair",
                     count: int = 100, num_points: int = 512, num_clouds: int = 100, seed: int = 42,
                     extractors: Optional[Mapping[str, object]] = None, output_dir: Optional[str] = None,
                     resume: bool = False, n_jobs: int = 1, run_config: Optional[dict] = None,
                     data_dir: Optional[str] = None) -> ExperimentReport:
    """
    No-generator runs of several discriminators on one real set, each
    evaluated against that set when extractors are given.
    """
    data = real_data(shape_class, count, num_points, seed, data_dir)
    clouds = data.clouds
    report = ExperimentReport("nogen", seed, dict(run_config or {}))
    reports, logs = {}, {}
    for spec in discriminators:
        run_dir = os.path.join(output_dir, spec.kind) if output_dir else None
        single, runlog, final = no_generator_train(spec, data, num_clouds, config, seed, run_dir, resume)
        report.results.update(single.results)
        report.artifacts.update({f"{spec.kind}/{k}": v for k, v in single.artifacts.items()})
        logs[spec.kind] = runlog
        _evaluate(report.results, reports, spec.kind, final, clouds, extractors, n_jobs)
    _write_outputs(report, reports, logs, output_dir, "No-generator Wasserstein estimates")
    return report


def gan_experiment(gen_spec: NetworkSpec, discriminators: Sequence[NetworkSpec], config: TrainConfig,
                   shape_class: str = "chair", count: int = 100, num_samples: int = 100, seed: int = 42,
                   extractors: Optional[Mapping[str, object]] = None, output_dir: Optional[str] = None,
                   resume: bool = False, n_jobs: int = 1, run_config: Optional[dict] = None,
                   data_dir: Optional[str] = None) -> ExperimentReport:
    """
    Train the same generator against several discriminators for an equal
    budget and compare their samples.
    """
    data = real_data(shape_class, count, gen_spec.num_points, seed, data_dir)
    clouds = data.clouds
    report = ExperimentReport("gan", seed, dict(run_config or {}))
    reports, logs = {}, {}
    for spec in discriminators:
        run_dir = os.path.join(output_dir, spec.kind) if output_dir else None
        single, runlog, trainer = train_gan(gen_spec, spec, data, config, seed, run_dir, resume)
        name = f"{gen_spec.kind}+{spec.kind}"
        report.results.update(single.results)
        report.artifacts.update({f"{spec.kind}/{k}": v for k, v in single.artifacts.items()})
        logs[name] = runlog
        samples = trainer.samples(num_samples, seed_streams(seed, ["eval"])["eval"])
        if run_dir:
            write_cloud_dir(os.path.join(run_dir, "samples"), samples,
                            [f"sample-{i:05d}" for i in range(len(samples))])
            report.artifacts[f"{spec.kind}/samples"] = os.path.join(run_dir, "samples")
        _evaluate(report.results, reports, name, samples, clouds, extractors, n_jobs)
    _write_outputs(report, reports, logs, output_dir, "GAN Wasserstein estimates")
    return report
