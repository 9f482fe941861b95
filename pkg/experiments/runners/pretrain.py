from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple
import logging
import os

from autodiff.losses import CrossEntropyLoss
from dataloaders.clouds import build_category_dataset
from dataloaders.dataloader import BatchLoader
from geometry.cloud import LabeledCloudSet
from geometry.procedural import SHAPE_CLASSES
from models.networks import FeatureExtractor, init_network
from models.spec import NetworkSpec
from models.weights import WeightBlob, WeightFileError, load_network, save_weights
from trainers.classifier import ClassifierTrainer
from utils.utils import seed_streams

from .classification import DEFAULT_OPTIMIZER, fit_classifier
from .report import ExperimentReport

log = logging.getLogger(__name__)

EXTRACTOR_VARIANTS = {"max": "pointnet-max", "mix": "pointnet-mix", "dgcnn": "dgcnn"}


def extractor_spec(variant: str, num_classes: int, width: float = 1.0, k: int = 20) -> NetworkSpec:
    if variant not in EXTRACTOR_VARIANTS:
        raise ValueError(f"Extractor variant: {variant} not supported, expected one of {list(EXTRACTOR_VARIANTS)}")
    return NetworkSpec("feature-extractor", width=width, k=k, num_classes=num_classes,
                       backbone=EXTRACTOR_VARIANTS[variant])


def extractor_path(directory: str, variant: str) -> str:
    return os.path.join(directory, f"extractor-{variant}.weights")


def pretrain_feature_extractor(variant: str, data: Mapping[str, LabeledCloudSet], epochs: int, width: float = 1.0,
                               k: int = 20, batch_size: int = 16, seed: int = 42,
                               optimizer: Optional[Callable] = None,
                               diagnostics_dir: Optional[str] = None) -> Tuple[WeightBlob, Dict[str, float]]:
    """
    Train a shape classifier with cross-entropy and keep its encoder.

    Args:
        variant (str): "max", "mix" or "dgcnn".
        data: Split name -> multi-class set; "train" and "test" are required.
        epochs (int): Training epochs.
        width (float): Width multiplier of the encoder.
        k (int): DGCNN neighbours.
        batch_size (int): Clouds per step.
        seed (int): Master seed.
        optimizer: Factory params -> Optimizer.
        diagnostics_dir: Where a divergence diagnostic is written.

    Returns:
        tuple: Headless extractor weights (classifier head dropped) and the
            test metrics of the full classifier.
    """
    if "train" not in data or "test" not in data:
        raise ValueError(f"Pretraining needs train and test splits, got {sorted(data)}")
    num_classes = len(data["train"].label_set)
    if num_classes < 2:
        raise ValueError("Pretraining needs at least 2 classes")

    spec = extractor_spec(variant, num_classes, width, k)
    streams = seed_streams(seed, ["init", "training"])
    model: FeatureExtractor = init_network(spec, streams["init"])
    validation = data.get("validation")
    trainer = ClassifierTrainer(
        model=model,
        train_dataloader=BatchLoader(data["train"], batch_size, shuffle=True, rng=streams["training"]),
        val_dataloader=BatchLoader(validation, batch_size, shuffle=False) if validation is not None else None,
        test_dataloader=BatchLoader(data["test"], batch_size, shuffle=False),
        criterion=CrossEntropyLoss(),
        optimizer=(optimizer or DEFAULT_OPTIMIZER)(params=model.parameters()),
        task="multiclass",
        diagnostics_dir=diagnostics_dir,
    )
    fit_classifier(trainer, epochs)
    test_metrics = trainer.test()
    log.info(f"Extractor {variant}: test accuracy {test_metrics['accuracy']:.4f}")
    headless = model.headless()
    return WeightBlob.from_network(headless.spec, headless), test_metrics


def pretrain_experiment(variants: Sequence[str], classes: Sequence[str] = SHAPE_CLASSES, per_class: int = 100,
                        num_points: int = 512, epochs: int = 50, width: float = 1.0, k: int = 20,
                        batch_size: int = 16, seed: int = 42, output_dir: Optional[str] = None,
                        optimizer: Optional[Callable] = None, config: Optional[dict] = None) -> ExperimentReport:
    """
    Pretrain every requested extractor on one procedural multi-category dataset.
    """
    data = build_category_dataset(classes, per_class, num_points, seed_streams(seed, ["data"])["data"])
    report = ExperimentReport("pretrain", seed, dict(config or {}))
    for variant in variants:
        blob, test_metrics = pretrain_feature_extractor(variant, data, epochs, width, k, batch_size, seed, optimizer,
                                                        diagnostics_dir=output_dir)
        report.results[variant] = {"test_accuracy": test_metrics["accuracy"], "test_auc": test_metrics["auc"],
                                   "feature_dim": blob.spec.feature_dim, "fingerprint": blob.fingerprint}
        if output_dir is not None:
            path = extractor_path(output_dir, variant)
            save_weights(blob, path)
            report.artifacts[f"extractor-{variant}"] = path
    return report


def load_extractors(paths: Mapping[str, Optional[str]]) -> Dict[str, FeatureExtractor]:
    """
    Load pretrained extractors keyed "max", "mix" and "dgcnn".

    Raises:
        FileNotFoundError: When a weight file is missing, naming the pretrain
            command that produces it.
    """
    extractors = {}
    for variant in EXTRACTOR_VARIANTS:
        path = paths.get(variant)
        if not path or not os.path.exists(path):
            raise FileNotFoundError(
                f"Missing {variant} extractor weights ({path}); create them with "
                f"`python experiments/run.py command=pretrain experiment.variants=[{variant}]`")
        network = load_network(path)
        if not isinstance(network, FeatureExtractor):
            raise WeightFileError(f"{path} does not hold a feature extractor")
        extractors[variant] = network.eval()
    return extractors
