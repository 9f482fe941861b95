from functools import partial
from typing import Callable, Dict, Optional, Sequence
import logging

import numpy as np

from autodiff.losses import BCEWithLogitsLoss
from autodiff.optim import Adam
from dataloaders.clouds import build_diagnostic_dataset
from dataloaders.dataloader import BatchLoader
from geometry.cloud import LabeledCloudSet
from models.networks import init_network
from models.spec import NetworkSpec
from trainers.classifier import ClassifierTrainer
from utils.utils import seed_streams

from .report import ExperimentReport

log = logging.getLogger(__name__)

DEFAULT_OPTIMIZER = partial(Adam, lr=1e-4, betas=(0.5, 0.999))


def fit_classifier(trainer: ClassifierTrainer, epochs: int) -> Dict[str, list]:
    """
    Run the train/evaluate loop and keep the per-epoch metrics.
    """
    history = {"train": [], "val": []}
    for epoch in range(1, epochs + 1):
        history["train"].append(trainer.train(current_epoch_nr=epoch))
        val_metrics = trainer.evaluate(current_epoch_nr=epoch)
        if val_metrics:
            history["val"].append(val_metrics)
    return history


def train_classifier(spec: NetworkSpec, train_set: LabeledCloudSet, test_set: LabeledCloudSet, epochs: int,
                     batch_size: int = 16, seed: int = 42, optimizer: Optional[Callable] = None, criterion=None,
                     val_set: Optional[LabeledCloudSet] = None, diagnostics_dir: Optional[str] = None,
                     config: Optional[dict] = None) -> ExperimentReport:
    """
    Supervised real/fake training of one discriminator with binary
    cross-entropy on its sigmoid logit.

    Args:
        spec (NetworkSpec): Discriminator to train.
        train_set, test_set: Labeled real (1) / fake (0) clouds.
        epochs (int): Training epochs.
        batch_size (int): Clouds per step.
        seed (int): Master seed; "init" and "training" streams are derived from it.
        optimizer: Factory params -> Optimizer, Adam(1e-4, (0.5, 0.999)) by default.
        criterion: Loss on (logits, labels), BCE with logits by default.
        val_set: Optional validation set logged per epoch.
        diagnostics_dir: Where a divergence diagnostic is written.
        config: Configuration recorded in the report.

    Returns:
        ExperimentReport: train/test accuracy and ROC-AUC under results[spec.kind].
    """
    if not spec.is_discriminator:
        raise ValueError(f"Kind: {spec.kind} is not a discriminator")
    for dataset in (train_set, test_set):
        if set(dataset.labels.tolist()) - {0, 1}:
            raise ValueError(f"{dataset.split} labels must be binary")

    streams = seed_streams(seed, ["init", "training"])
    model = init_network(spec, streams["init"])
    trainer = ClassifierTrainer(
        model=model,
        train_dataloader=BatchLoader(train_set, batch_size, shuffle=True, rng=streams["training"]),
        val_dataloader=BatchLoader(val_set, batch_size, shuffle=False) if val_set is not None else None,
        test_dataloader=BatchLoader(test_set, batch_size, shuffle=False),
        criterion=criterion or BCEWithLogitsLoss(),
        optimizer=(optimizer or DEFAULT_OPTIMIZER)(params=model.parameters()),
        task="binary",
        diagnostics_dir=diagnostics_dir,
    )
    history = fit_classifier(trainer, epochs)

    # Final accuracies are measured in evaluation mode on both splits
    train_metrics = trainer.measure(BatchLoader(train_set, batch_size, shuffle=False))
    test_metrics = trainer.test()
    log.info(f"{spec.kind}: train accuracy {train_metrics['accuracy']:.4f}, test accuracy {test_metrics['accuracy']:.4f}")
    results = {spec.kind: {
        "train_accuracy": train_metrics["accuracy"],
        "test_accuracy": test_metrics["accuracy"],
        "train_auc": train_metrics["auc"],
        "test_auc": test_metrics["auc"],
        "epochs": epochs,
        "history": history["train"],
    }}
    return ExperimentReport("table1", seed, dict(config or {}), results)


def table1_experiment(discriminators: Sequence[NetworkSpec], dataset: str, shape_class: str = "chair", count: int = 100,
                      num_points: int = 512, epochs: int = 200, batch_size: int = 16, seed: int = 42,
                      optimizer: Optional[Callable] = None, criterion=None, diagnostics_dir: Optional[str] = None,
                      config: Optional[dict] = None) -> ExperimentReport:
    """
    Sampling-sensitivity classification: every discriminator is trained on
    the same real/fake dataset ("clustering" or "fps").
    """
    data_rng = seed_streams(seed, ["data"])["data"]
    train_set, test_set = build_diagnostic_dataset(dataset, shape_class, count, num_points, data_rng)
    report = ExperimentReport("table1", seed, dict(config or {}))
    report.results["dataset"] = {
        "kind": dataset, "shape_class": shape_class, "train_size": len(train_set), "test_size": len(test_set),
        "num_points": num_points,
    }
    for spec in discriminators:
        single = train_classifier(spec, train_set, test_set, epochs, batch_size, seed, optimizer, criterion,
                                  diagnostics_dir=diagnostics_dir)
        report.results.update(single.results)
    return report


def accuracy_table(report: ExperimentReport) -> Dict[str, tuple]:
    """
    (train %, test %) per discriminator, the left/right convention of the
    classification table.
    """
    return {name: (100.0 * r["train_accuracy"], 100.0 * r["test_accuracy"])
            for name, r in report.results.items() if isinstance(r, dict) and "test_accuracy" in r}


def majority(flags: Sequence[bool]) -> bool:
    return int(np.sum(flags)) * 2 > len(flags)
