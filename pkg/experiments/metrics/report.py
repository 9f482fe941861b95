import json
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Mapping, Optional

import numpy as np
import pandas as pd

from .frechet import GaussianStats, feature_stats, frechet
from .sets import set_metrics

log = logging.getLogger(__name__)

# field -> table column, in table order
COLUMNS = {
    "fpd_mix": "FPD-Mix",
    "fpd_max": "FPD-Max",
    "fgd": "FGD",
    "mmd_emd": "MMD-E",
    "mmd_cd": "MMD-C",
    "cov_emd": "COV-E",
    "cov_cd": "COV-C",
}
EXTRACTOR_METRICS = {"mix": "fpd_mix", "max": "fpd_max", "dgcnn": "fgd"}


@dataclass
class MetricReport:
    fpd_mix: float
    fpd_max: float
    fgd: float
    mmd_emd: float
    mmd_cd: float
    cov_emd: float
    cov_cd: float

    def __post_init__(self):
        for name in COLUMNS:
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"{COLUMNS[name]} must be finite and >= 0, got {value}")
            setattr(self, name, value)
        for name in ("cov_emd", "cov_cd"):
            if getattr(self, name) > 100.0:
                raise ValueError(f"{COLUMNS[name]} must lie in [0, 100]")

    def to_row(self) -> Dict[str, float]:
        return {column: getattr(self, name) for name, column in COLUMNS.items()}

    @classmethod
    def from_row(cls, row: Mapping[str, float]) -> "MetricReport":
        return cls(**{name: float(row[column]) for name, column in COLUMNS.items()})

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def reports_to_frame(reports: Mapping[str, MetricReport]) -> pd.DataFrame:
    frame = pd.DataFrame([r.to_row() for r in reports.values()], columns=list(COLUMNS.values()))
    frame.insert(0, "name", list(reports.keys()))
    return frame


def write_reports_csv(reports: Mapping[str, MetricReport], path: str) -> None:
    """
    One row per named report; columns: name, then the seven metric columns.
    """
    reports_to_frame(reports).to_csv(path, index=False, float_format="%.17g")


def read_reports_csv(path: str) -> Dict[str, MetricReport]:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in COLUMNS.values() if c not in frame.columns]
    if missing:
        raise ValueError(f"Report {path} lacks columns {missing}")
    return {str(row["name"]): MetricReport.from_row(row) for _, row in frame.iterrows()}


def write_reports_json(reports: Mapping[str, MetricReport], path: str) -> None:
    with open(path, "w") as f:
        json.dump({name: r.to_row() for name, r in reports.items()}, f, indent=2)


def evaluate_sets(gen, ref, extractors: Mapping[str, object], ref_stats: Optional[Dict[str, GaussianStats]] = None,
                  n_jobs: int = 1, batch_size: int = 32) -> MetricReport:
    """
    Compute the seven-column report of a generated set against a reference set.

    Args:
        gen: Generated clouds (M, N, 3).
        ref: Reference clouds (R, N, 3).
        extractors: Pretrained networks keyed "max", "mix" and "dgcnn".
        ref_stats: Precomputed reference statistics per extractor key.
        n_jobs (int): Workers for the pairwise distance matrices.
        batch_size (int): Clouds per extractor forward pass.

    Returns:
        MetricReport: The report.
    """
    missing = [key for key in EXTRACTOR_METRICS if key not in extractors]
    if missing:
        raise ValueError(f"Missing feature extractors: {missing}")
    gen, ref = np.asarray(gen, dtype=np.float64), np.asarray(ref, dtype=np.float64)
    if gen.shape[1:] != ref.shape[1:]:
        raise ValueError(f"Generated clouds {gen.shape[1:]} and reference clouds {ref.shape[1:]} differ in shape")

    values = {}
    for key, name in EXTRACTOR_METRICS.items():
        reference = (ref_stats or {}).get(key) or feature_stats(ref, extractors[key], batch_size)
        values[name] = frechet(feature_stats(gen, extractors[key], batch_size), reference)
    values.update(set_metrics(gen, ref, n_jobs))
    log.info("Evaluated %d generated vs %d reference clouds", len(gen), len(ref))
    return MetricReport(**values)
