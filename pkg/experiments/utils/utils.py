from typing import Dict, Iterable
from omegaconf import OmegaConf, DictConfig
import numpy as np
import logging
import random
import zlib
import json
import wandb
import os

DEFAULT_SEED = 42

log = logging.getLogger(__name__)


def seed_everything(seed: int = DEFAULT_SEED) -> None:
    """
    Seeds basic parameters for reproductibility of results.

    Args:
        seed (int): Random seed.

    Returns:
        None
    """
    random.seed(seed)
    os.environ['PYTHONHASHSEED'] = str(seed)
    np.random.seed(seed)


def resolve_seed(config: DictConfig) -> int:
    """
    Seed of a run: general.seed, or the default when it is null.

    Args:
        config (DictConfig): Configuration file.

    Returns:
        int: The seed.

    Raises:
        ValueError: When general.strict_seed is set and no seed is given.
    """
    seed = config.general.get("seed")
    if seed is None:
        if config.general.get("strict_seed", False):
            raise ValueError("general.seed must be set explicitly when general.strict_seed=true")
        return DEFAULT_SEED
    return int(seed)


def seed_streams(seed: int, names: Iterable[str]) -> Dict[str, np.random.Generator]:
    """
    Independent random streams derived from one master seed, one per name.

    A stream depends only on (seed, name), so adding or removing other
    streams never changes it.

    Args:
        seed (int): Master seed.
        names (Iterable[str]): Stream names, e.g. "data", "init", "training".

    Returns:
        Dict[str, np.random.Generator]: Stream per name.
    """
    return {name: np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))]))
            for name in names}


def init_run(config: DictConfig) -> int:
    """
    Initialize a new run on Weights & Biases and set random seeds.

    Args:
        config (DictConfig): Configuration file.

    Returns:
        seed (int): Seed of the run.
    """
    seed = resolve_seed(config)
    seed_everything(seed)

    # Initiate wandb run
    wandb.init(project=config.wandb.project,
               entity=config.wandb.entity,
               config=OmegaConf.to_container(config, resolve=True),
               name=config.wandb.name,
               mode=config.wandb.mode,
               dir=config.general.output_dir)

    # Print config file content
    log.info("-" * 30 + " config " + "-" * 30)
    log.info("\n" + OmegaConf.to_yaml(config, resolve=True))
    log.info("-" * 30 + " config " + "-" * 30)

    return seed


def write_config_snapshot(config: DictConfig, output_dir: str, seed: int) -> str:
    """
    Write the resolved, merged config (with the effective seed) to output_dir/config.yaml.
    """
    os.makedirs(output_dir, exist_ok=True)
    resolved = OmegaConf.to_container(config, resolve=True)
    resolved.setdefault("general", {})["seed"] = seed
    path = os.path.join(output_dir, "config.yaml")
    with open(path, "w") as f:
        f.write(OmegaConf.to_yaml(OmegaConf.create(resolved)))
    return path


def write_error(output_dir: str, command: str, error: BaseException) -> str:
    """
    Write a machine-readable error report to output_dir/error.json.
    """
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, "error.json")
    with open(path, "w") as f:
        json.dump({"error": type(error).__name__, "message": str(error), "command": command}, f, indent=2)
    return path
