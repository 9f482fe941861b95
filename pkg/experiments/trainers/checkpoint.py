from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple
import logging
import json
import re
import os

import numpy as np

from models.module import Module
from models.spec import NetworkSpec
from models.weights import WeightBlob, load_weights, save_weights

from .runlog import RunLog

log = logging.getLogger(__name__)

CHECKPOINT_PATTERN = re.compile(r"^epoch-(\d+)$")


@dataclass
class Checkpoint:
    networks: Dict[str, WeightBlob]
    optimizers: Dict[str, Dict[str, np.ndarray]]
    rngs: Dict[str, dict]
    runlog: RunLog
    state: dict
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)


def checkpoint_path(root: str, epoch: int) -> str:
    return os.path.join(root, f"epoch-{epoch:05d}")


def save_checkpoint(directory: str, networks: Mapping[str, Tuple[NetworkSpec, Module]], optimizers: Mapping[str, object],
                    rngs: Mapping[str, np.random.Generator], runlog: RunLog, state: dict,
                    arrays: Optional[Mapping[str, np.ndarray]] = None) -> str:
    """
    Write everything needed to continue a run bit for bit.

    Layout: <name>.weights per network, optimizers.npz with its key index,
    rng.json, runlog.csv, state.json and arrays.npz for extra tensors.

    Args:
        directory (str): Checkpoint directory, created when missing.
        networks: Name -> (spec, network).
        optimizers: Name -> optimizer with state_dict().
        rngs: Name -> generator whose bit-generator state is stored.
        runlog (RunLog): Log so far.
        state (dict): JSON-serializable counters.
        arrays: Extra named arrays.

    Returns:
        str: The checkpoint directory.
    """
    os.makedirs(directory, exist_ok=True)
    for name, (spec, network) in networks.items():
        save_weights(WeightBlob.from_network(spec, network), os.path.join(directory, f"{name}.weights"))
    # npz member names are positional; the qualified keys go to a JSON index
    entries = [(name, key, value) for name, opt in optimizers.items() for key, value in opt.state_dict().items()]
    np.savez(os.path.join(directory, "optimizers.npz"), *[value for _, _, value in entries])
    with open(os.path.join(directory, "optimizers.json"), "w") as f:
        json.dump([[name, key] for name, key, _ in entries], f)
    with open(os.path.join(directory, "rng.json"), "w") as f:
        json.dump({name: rng.bit_generator.state for name, rng in rngs.items()}, f, indent=2)
    runlog.write_csv(os.path.join(directory, "runlog.csv"))
    with open(os.path.join(directory, "state.json"), "w") as f:
        json.dump({**state, "networks": sorted(networks)}, f, indent=2, sort_keys=True)
    if arrays:
        np.savez(os.path.join(directory, "arrays.npz"), **dict(arrays))
    log.info(f"Checkpoint written to {directory}")
    return directory


def load_checkpoint(directory: str) -> Checkpoint:
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"No checkpoint at {directory}")
    with open(os.path.join(directory, "state.json")) as f:
        state = json.load(f)
    networks = {name: load_weights(os.path.join(directory, f"{name}.weights")) for name in state.pop("networks")}
    optimizers: Dict[str, Dict[str, np.ndarray]] = {}
    with open(os.path.join(directory, "optimizers.json")) as f:
        index = json.load(f)
    with np.load(os.path.join(directory, "optimizers.npz")) as archive:
        for i, (name, key) in enumerate(index):
            optimizers.setdefault(name, {})[key] = archive[f"arr_{i}"]
    with open(os.path.join(directory, "rng.json")) as f:
        rngs = json.load(f)
    arrays = {}
    arrays_path = os.path.join(directory, "arrays.npz")
    if os.path.exists(arrays_path):
        with np.load(arrays_path) as archive:
            arrays = {key: archive[key] for key in archive.files}
    return Checkpoint(networks, optimizers, rngs, RunLog.read_csv(os.path.join(directory, "runlog.csv")), state, arrays)


def latest_checkpoint(root: Optional[str]) -> Optional[str]:
    """
    Most recent epoch-NNNNN directory under root, or None.
    """
    if root is None or not os.path.isdir(root):
        return None
    epochs = [(int(m.group(1)), name) for name in os.listdir(root) if (m := CHECKPOINT_PATTERN.match(name))]
    if not epochs:
        return None
    return os.path.join(root, max(epochs)[1])
