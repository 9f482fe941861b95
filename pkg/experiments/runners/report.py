from dataclasses import asdict, dataclass, field
from typing import Any, Dict
import json
import os

import numpy as np

EXPERIMENT_KINDS = ("table1", "table2", "gan", "nogen", "pretrain", "stability")


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class ExperimentReport:
    """
    Self-describing result of one experiment driver.

    Attributes:
        kind: One of EXPERIMENT_KINDS.
        seed: Master seed of the run.
        config: Resolved configuration the run used.
        results: Per-network accuracies or metric reports.
        artifacts: Artifact name -> path written by the run.
    """
    kind: str
    seed: int
    config: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"Experiment: {self.kind} not supported")

    def to_json(self) -> str:
        return json.dumps(_plain(asdict(self)), indent=2, sort_keys=True)

    def write(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.artifacts.setdefault("report", path)
        with open(path, "w") as f:
            f.write(self.to_json())
        return path

    @classmethod
    def read(cls, path: str) -> "ExperimentReport":
        with open(path) as f:
            return cls(**json.load(f))
