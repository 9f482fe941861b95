import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd


@dataclass
class CheckpointStats:
    name: str
    values: List[float]
    mean: float
    std: float
    relative_std: Optional[float]


@dataclass
class StabilityReport:
    """
    Spread of a metric over repeated sample sets, per checkpoint.

    relative_std is std / |mean| (population std); relative_mean_diff is
    |m_first - m_last| / |m_first|. Both are None when the mean is zero.
    """
    checkpoints: List[CheckpointStats] = field(default_factory=list)
    relative_mean_diff: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([{
            "checkpoint": c.name, "mean": c.mean, "std": c.std, "relative_std": c.relative_std,
        } for c in self.checkpoints])

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def fpd_stability(samples: Mapping[str, Sequence[float]]) -> StabilityReport:
    """
    Stability statistics of metric values gathered at one or more checkpoints.

    Args:
        samples: Ordered checkpoint name -> metric values (>= 2 each).

    Returns:
        StabilityReport: Per-checkpoint statistics and the relative mean
        difference between the first and last checkpoint.
    """
    if not samples:
        raise ValueError("No checkpoints given")
    checkpoints = []
    for name, values in samples.items():
        values = np.asarray(values, dtype=np.float64)
        if len(values) < 2:
            raise ValueError(f"Checkpoint {name} needs at least 2 values, got {len(values)}")
        if not np.isfinite(values).all():
            raise ValueError(f"Checkpoint {name} has non-finite values")
        mean, std = float(values.mean()), float(values.std())
        relative = std / abs(mean) if mean != 0 else None
        checkpoints.append(CheckpointStats(str(name), values.tolist(), mean, std, relative))

    diff = None
    if len(checkpoints) > 1:
        first, last = checkpoints[0].mean, checkpoints[-1].mean
        diff = abs(first - last) / abs(first) if first != 0 else None
    return StabilityReport(checkpoints, diff)


def as_percent(value: Optional[float]) -> float:
    return math.nan if value is None else 100.0 * value
