from typing import Mapping, Optional, Sequence, Union
import logging
import os

import numpy as np

from dataloaders.clouds import read_cloud_dir
from metrics.frechet import feature_stats, frechet
from metrics.report import MetricReport, evaluate_sets
from metrics.stability import StabilityReport, fpd_stability
from models.weights import load_network
from trainers.wgan import generate_clouds
from utils.utils import seed_streams

from .report import ExperimentReport

log = logging.getLogger(__name__)

DEFAULT_NUM_SAMPLES = 10_000


def load_samples(samples: Union[str, np.ndarray], num_samples: Optional[int] = DEFAULT_NUM_SAMPLES) -> np.ndarray:
    """
    Clouds from a sample directory or an array, truncated to the first `num_samples`.
    """
    clouds = read_cloud_dir(samples)[0] if isinstance(samples, str) else np.asarray(samples, dtype=np.float64)
    if num_samples is not None and len(clouds) > num_samples:
        clouds = clouds[:num_samples]
    return clouds


def evaluate_run(samples: Union[str, np.ndarray], ref: Union[str, np.ndarray], extractors: Mapping[str, object],
                 num_samples: Optional[int] = DEFAULT_NUM_SAMPLES, n_jobs: int = 1,
                 batch_size: int = 32) -> MetricReport:
    """
    Score generated samples against a reference set with every metric.

    Args:
        samples: Sample directory (XYZ files) or array (M, N, 3).
        ref: Reference directory or array.
        extractors: Pretrained extractors keyed "max", "mix" and "dgcnn".
        num_samples: Generated clouds used, the first ones in file order.
        n_jobs (int): Workers for the distance matrices.
        batch_size (int): Clouds per extractor pass.

    Returns:
        MetricReport: The seven-column report.
    """
    gen = load_samples(samples, num_samples)
    reference = load_samples(ref, None)
    log.info(f"Evaluating {len(gen)} samples against {len(reference)} reference clouds")
    return evaluate_sets(gen, reference, extractors, n_jobs=n_jobs, batch_size=batch_size)


def stability_experiment(checkpoints: Sequence[str], ref: Union[str, np.ndarray], extractor, num_sets: int = 5,
                         num_samples: int = DEFAULT_NUM_SAMPLES, seed: int = 42, batch_size: int = 32,
                         output_dir: Optional[str] = None, run_config: Optional[dict] = None) -> ExperimentReport:
    """
    FPD-Max over `num_sets` independently seeded sample sets per generator
    checkpoint, summarized by fpd_stability.

    Args:
        checkpoints: Checkpoint directories holding generator.weights, in order.
        ref: Reference clouds or directory.
        extractor: Pretrained PointNet-Max extractor.
        num_sets (int): Sample sets per checkpoint.
        num_samples (int): Clouds per sample set.
        seed (int): Master seed; set i uses the stream "stability-i" at every checkpoint.
    """
    if num_sets < 2:
        raise ValueError(f"Stability needs at least 2 sample sets, got {num_sets}")
    reference = load_samples(ref, None)
    ref_stats = feature_stats(reference, extractor, batch_size)
    streams = [f"stability-{i}" for i in range(num_sets)]
    values = {}
    for path in checkpoints:
        generator = load_network(os.path.join(path, "generator.weights"))
        rngs = seed_streams(seed, streams)
        values[os.path.basename(os.path.normpath(path))] = [
            frechet(feature_stats(generate_clouds(generator, num_samples, rngs[name]), extractor, batch_size),
                    ref_stats)
            for name in streams
        ]
    stability: StabilityReport = fpd_stability(values)
    report = ExperimentReport("stability", seed, dict(run_config or {}))
    report.results = {"fpd_max": values, "relative_mean_diff": stability.relative_mean_diff,
                      "checkpoints": stability.to_frame().to_dict(orient="records")}
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, "stability.json")
        with open(path, "w") as f:
            f.write(stability.to_json())
        report.artifacts["stability"] = path
    return report
