from abc import ABC
from typing import Dict, Optional
import logging
import json
import os

import wandb

log = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """
    Raised when a training step produces non-finite values.
    """

    def __init__(self, message: str, iteration: int, diagnostic_path: Optional[str] = None):
        super().__init__(f"Training diverged at iteration {iteration}: {message}")
        self.iteration = iteration
        self.diagnostic_path = diagnostic_path


def write_diagnostic(directory: Optional[str], payload: dict) -> Optional[str]:
    """
    Dump a JSON diagnostic next to the run artifacts.

    Args:
        directory (str): Target directory, nothing is written when None.
        payload (dict): Diagnostic content.

    Returns:
        Path of the written file or None.
    """
    if directory is None:
        return None
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, "diagnostic.json")
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=str)
    return path


class Trainer(ABC):
    def __init__(self, model, train_dataloader, val_dataloader, test_dataloader, criterion, optimizer, task):
        self.model = model
        self.train_dataloader = train_dataloader
        self.val_dataloader = val_dataloader
        self.test_dataloader = test_dataloader
        self.criterion = criterion
        self.optimizer = optimizer
        self.task = task

    @staticmethod
    def log_metrics(metrics: Dict[str, float], current_epoch_nr: int, metric_type: str) -> None:
        """
        Log metrics to wandb

        Args:
            metrics (Dict[str, float]): Metric name -> value
            current_epoch_nr (int): Current epoch number
            metric_type (str): Type of metric (train, val or test)

        Returns:
            None
        """
        if metric_type == 'test':
            for name, value in metrics.items():
                log.info(f'Test {name}: {value:.4f}')
                if wandb.run is not None:
                    wandb.run.summary[f'test_{name}'] = value
        elif metric_type in ('train', 'val'):
            if wandb.run is not None:
                wandb.log({f'{metric_type}_{name}': value for name, value in metrics.items()}, step=current_epoch_nr)
        else:
            raise ValueError(f"Metric type: {metric_type} not supported")

    def train(self, current_epoch_nr: int) -> Dict[str, float]:
        """
        Train the model for one epoch

        Args:
            current_epoch_nr (int): Current epoch number

        Returns:
            Training metrics of the epoch
        """
        raise NotImplementedError

    def evaluate(self, current_epoch_nr: int) -> Dict[str, float]:
        """
        Evaluate the model for one epoch

        Args:
            current_epoch_nr (int): Current epoch number

        Returns:
            Validation metrics of the epoch
        """
        raise NotImplementedError

    def test(self) -> Dict[str, float]:
        """
        Test the model after training

        Returns:
            Test metrics
        """
        raise NotImplementedError
