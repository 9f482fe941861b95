from typing import Callable, Dict
import logging
import os

from hydra.utils import instantiate
from omegaconf import DictConfig, OmegaConf
import numpy as np
import wandb

from autodiff.tensor import set_debug
from dataloaders.clouds import NamedMesh, build_shape_set, read_cloud_dir, resample_set, write_cloud_dir
from geometry.density import density_cv, kde_density
from geometry.io import density_colors, read_mesh, read_xyz, write_off, write_ply
from geometry.procedural import ProceduralSpec
from geometry.sampling import sample_fps
from metrics.report import write_reports_csv, write_reports_json
from runners.adversarial import gan_experiment, nogen_experiment
from runners.classification import table1_experiment
from runners.evaluation import evaluate_run, stability_experiment
from runners.pretrain import extractor_path, load_extractors, pretrain_experiment
from runners.report import ExperimentReport
from runners.spectrum import table2_experiment
from utils.utils import init_run, seed_streams, write_config_snapshot

log = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "configs")
MESH_EXTENSIONS = (".off", ".obj")


def command_output_dir(config: DictConfig) -> str:
    return config.command.output


def network_spec(config: DictConfig, kind: str, **overrides):
    """
    Instantiate the NetworkSpec of configs/model/<kind>.yaml against the
    active profile.
    """
    path = os.path.join(CONFIG_DIR, "model", f"{kind}.yaml")
    if not os.path.exists(path):
        raise ValueError(f"Network kind: {kind} has no model config")
    merged = OmegaConf.merge({"profile": config.profile}, {"model": OmegaConf.load(path)})
    return instantiate(merged.model, **overrides)


def extractor_paths(config: DictConfig) -> Dict[str, str]:
    directory = config.command.get("extractors") or config.experiment.get("extractors")
    return {variant: extractor_path(directory, variant) for variant in ("max", "mix", "dgcnn")}


def cmd_gen_data(config: DictConfig, seed: int) -> str:
    """
    Procedural meshes of every requested class, sampled into XYZ clouds, plus
    a manifest. The same seed reproduces the directory byte for byte.
    """
    c = config.command
    rng = seed_streams(seed, ["data"])["data"]
    clouds, names, labels = [], [], []
    for label, shape_class in enumerate(c.classes):
        shape_class = ProceduralSpec(shape_class).shape_class
        sampled, meshes = build_shape_set(shape_class, c.count, c.points, rng, c.sampler)
        clouds.extend(sampled)
        names.extend(m.mesh_id for m in meshes)
        labels.extend([label] * len(meshes))
        if c.write_meshes:
            mesh_dir = os.path.join(c.output, "meshes")
            os.makedirs(mesh_dir, exist_ok=True)
            for m in meshes:
                write_off(os.path.join(mesh_dir, f"{m.mesh_id}.off"), m.mesh)
    extra = {"classes": list(c.classes), "sampler": c.sampler, "points": int(c.points), "seed": seed}
    write_cloud_dir(c.output, clouds, names, labels, extra)
    log.info(f"Wrote {len(clouds)} clouds to {c.output}")
    return c.output


def cmd_sample(config: DictConfig, seed: int) -> str:
    """
    Resample a mesh directory (OFF/OBJ files) with any sampler, or subsample
    a cloud directory uniformly or by FPS.
    """
    c = config.command
    rng = seed_streams(seed, ["sampling"])["sampling"]
    files = sorted(f for f in os.listdir(c.input) if f.lower().endswith(MESH_EXTENSIONS))
    if files:
        meshes = [NamedMesh(os.path.splitext(f)[0], "", read_mesh(os.path.join(c.input, f))) for f in files]
        clouds = resample_set(meshes, c.points, c.sampler, rng)
        names = [m.mesh_id for m in meshes]
    else:
        dense, names, _ = read_cloud_dir(c.input)
        if c.points > dense.shape[1]:
            raise ValueError(f"Cannot take {c.points} points from clouds of {dense.shape[1]}")
        if c.sampler == "fps":
            clouds = np.stack([sample_fps(cloud, c.points, start=rng) for cloud in dense])
        elif c.sampler == "uniform":
            clouds = np.stack([cloud[np.sort(rng.choice(len(cloud), c.points, replace=False))] for cloud in dense])
        else:
            raise ValueError(f"Sampler: {c.sampler} needs meshes, {c.input} holds only clouds")
    write_cloud_dir(c.output, clouds, names, extra={"sampler": c.sampler, "points": int(c.points), "seed": seed})
    return c.output


def cmd_viz(config: DictConfig, seed: int) -> str:
    """
    Density-colored PLY of one XYZ cloud (dark blue sparse, light yellow dense).
    """
    c = config.command
    cloud = read_xyz(c.input)
    field = kde_density(cloud, c.bandwidth)
    output = c.get("ply") or os.path.join(c.output, os.path.splitext(os.path.basename(c.input))[0] + ".ply")
    os.makedirs(os.path.dirname(output) or ".", exist_ok=True)
    write_ply(output, cloud, density_colors(field))
    log.info(f"{c.input}: density CV {density_cv(field):.4f}, written to {output}")
    return output


def cmd_eval(config: DictConfig, seed: int) -> str:
    c = config.command
    extractors = load_extractors(extractor_paths(config))
    report = evaluate_run(c.gen, c.ref, extractors, c.num_samples, config.general.n_jobs)
    name = os.path.basename(os.path.normpath(c.gen))
    os.makedirs(c.output, exist_ok=True)
    write_reports_csv({name: report}, os.path.join(c.output, "metrics.csv"))
    write_reports_json({name: report}, os.path.join(c.output, "metrics.json"))
    log.info(f"{name}: {report.to_row()}")
    return os.path.join(c.output, "metrics.csv")


def _optimizer_factory(config: DictConfig) -> Callable:
    return instantiate(config.optimizer, _partial_=True)


def run_experiment(config: DictConfig, seed: int) -> ExperimentReport:
    e, p = config.experiment, config.profile
    output = config.command.output
    snapshot = OmegaConf.to_container(config, resolve=True)
    if e.kind == "table1":
        specs = [network_spec(config, kind) for kind in e.discriminators]
        return table1_experiment(specs, e.dataset, e.shape_class, e.count, p.num_points, e.epochs, p.batch_size, seed,
                                 _optimizer_factory(config), instantiate(config.loss), output, snapshot)
    if e.kind == "table2":
        return table2_experiment(load_extractors(extractor_paths(config)), e.shape_class, e.count, p.num_points,
                                 seed, config.general.n_jobs, output, snapshot)
    if e.kind == "pretrain":
        return pretrain_experiment(list(e.variants), list(e.classes), e.per_class, p.num_points, e.epochs,
                                   p.extractor_width, p.k, p.batch_size, seed, e.extractors,
                                   _optimizer_factory(config), snapshot)
    if e.kind in ("gan", "nogen"):
        train_config = instantiate(config.trainer, seed=seed)
        specs = [network_spec(config, kind) for kind in e.discriminators]
        extractors = load_extractors(extractor_paths(config)) if e.evaluate else None
        if e.kind == "gan":
            return gan_experiment(instantiate(config.model), specs, train_config, e.shape_class, e.count,
                                  e.num_samples, seed, extractors, output, e.resume, config.general.n_jobs, snapshot,
                                  e.get("data"))
        return nogen_experiment(specs, train_config, e.shape_class, e.count, p.num_points, e.num_clouds, seed,
                                extractors, output, e.resume, config.general.n_jobs, snapshot, e.get("data"))
    if e.kind == "stability":
        extractor = load_extractors(extractor_paths(config))["max"]
        return stability_experiment(list(e.checkpoints), e.ref, extractor, e.num_sets, e.num_samples, seed,
                                    output_dir=output, run_config=snapshot)
    raise ValueError(f"Experiment: {e.kind} not supported")


def cmd_experiment(config: DictConfig, seed: int) -> str:
    report = run_experiment(config, seed)
    for name, result in report.results.items():
        log.info(f"{name}: {result}")
    return report.write(os.path.join(config.command.output, "report.json"))


def cmd_pretrain(config: DictConfig, seed: int) -> str:
    if config.experiment.kind != "pretrain":
        raise ValueError(f"The pretrain command needs experiment=pretrain, got {config.experiment.kind}")
    return cmd_experiment(config, seed)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "sample": cmd_sample,
    "viz": cmd_viz,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "pretrain": cmd_pretrain,
}


def run_command(config: DictConfig) -> str:
    """
    Seed the run, snapshot the resolved config into the command's output
    directory and execute the selected command.

    Returns:
        str: Path of the main artifact.
    """
    name = config.command.name
    if name not in COMMANDS:
        raise ValueError(f"Command: {name} not supported")
    set_debug(config.general.debug)
    seed = init_run(config)
    write_config_snapshot(config, command_output_dir(config), seed)
    try:
        return COMMANDS[name](config, seed)
    finally:
        if wandb.run is not None:
            wandb.finish()
