from typing import Dict, Optional
import logging

from tqdm import tqdm
from sklearn import metrics
from scipy import special
import numpy as np

from autodiff.tensor import NumericalError, Tape, Tensor, backward

from .trainer import Trainer, TrainingDivergedError, write_diagnostic

log = logging.getLogger(__name__)

TASKS = ("binary", "multiclass")


class ClassifierTrainer(Trainer):
    """
    Supervised training of a discriminator (binary real/fake, BCE on the
    sigmoid logit) or a feature extractor (multi-class, cross-entropy).
    """

    def __init__(self, model, train_dataloader, val_dataloader, test_dataloader, criterion, optimizer, task,
                 diagnostics_dir: Optional[str] = None):
        super().__init__(model, train_dataloader, val_dataloader, test_dataloader, criterion, optimizer, task)
        if task not in TASKS:
            raise ValueError(f"Task: {task} not found.")
        self.diagnostics_dir = diagnostics_dir
        self.iteration = 0

    def calculate_y_hat(self, x) -> Tensor:
        """
        Calculate the logits for the given clouds and task

        Args:
            x: Batch of clouds (B, N, 3)

        Returns:
            Logits, (B,) for binary and (B, C) for multiclass
        """
        if self.task == "binary":
            return self.model.logits(x)
        return self.model(x)

    def calculate_predictions(self, y_hat: np.ndarray) -> tuple:
        """
        Calculate predicted labels and class scores from logits

        Args:
            y_hat (np.ndarray): Logits

        Returns:
            tuple: The predicted labels and the scores used for ROC-AUC
        """
        if self.task == "binary":
            scores = special.expit(y_hat)
            return (scores > 0.5).astype(np.int64), scores
        scores = special.softmax(y_hat, axis=-1)
        return np.argmax(y_hat, axis=-1), scores

    def roc_auc(self, targets: np.ndarray, scores: np.ndarray) -> float:
        try:
            if self.task == "binary":
                return float(metrics.roc_auc_score(targets, scores))
            return float(metrics.roc_auc_score(targets, scores, multi_class="ovr",
                                               labels=np.arange(scores.shape[1])))
        except ValueError:
            return float("nan")

    def _step(self, x: np.ndarray, y: np.ndarray):
        with Tape("classifier") as tape:
            params = self.model.bind(tape)
            try:
                y_hat = self.calculate_y_hat(x)
                loss = self.criterion(y_hat, y)
                grads = backward(tape, loss, list(params.values()))
            except NumericalError as e:
                path = write_diagnostic(self.diagnostics_dir, {"iteration": self.iteration, "error": str(e),
                                                               "tape": tape.to_json()})
                raise TrainingDivergedError(str(e), self.iteration, path) from e
            finally:
                self.model.unbind()
        self.optimizer.step(dict(zip(params.keys(), grads)))
        self.iteration += 1
        return loss.item(), y_hat.data

    def _summarize(self, targets, logits, running_loss, total) -> Dict[str, float]:
        targets, logits = np.concatenate(targets), np.concatenate(logits)
        predicted, scores = self.calculate_predictions(logits)
        return {
            "accuracy": float(np.mean(predicted == targets)),
            "auc": self.roc_auc(targets, scores),
            "loss": running_loss / max(total, 1),
        }

    def train(self, current_epoch_nr):
        self.model.train()

        running_loss = 0.0
        correct = 0
        total = 0

        logits = []
        targets = []

        loop = tqdm(self.train_dataloader, total=len(self.train_dataloader), leave=False)
        for x, y in loop:
            loss, y_hat = self._step(x, y)

            running_loss += loss * len(y)
            predicted, _ = self.calculate_predictions(y_hat)
            correct += int(np.sum(predicted == y))
            total += len(y)

            targets.append(y)
            logits.append(y_hat)

            loop.set_description(f'Epoch {current_epoch_nr}')
            loop.set_postfix(train_acc=round(correct / total, 2),
                             train_loss=round(running_loss / total, 4))

        train_metrics = self._summarize(targets, logits, running_loss, total)
        self.log_metrics(train_metrics, current_epoch_nr, 'train')
        return train_metrics

    def _run_eval(self, dataloader) -> Dict[str, float]:
        self.model.eval()
        running_loss, total = 0.0, 0
        logits, targets = [], []
        for x, y in dataloader:
            y_hat = self.calculate_y_hat(x)
            running_loss += self.criterion(y_hat, y).item() * len(y)
            total += len(y)
            targets.append(y)
            logits.append(y_hat.data)
        self.model.train()
        return self._summarize(targets, logits, running_loss, total)

    def evaluate(self, current_epoch_nr):
        if self.val_dataloader is None:
            return {}
        val_metrics = self._run_eval(self.val_dataloader)
        self.log_metrics(val_metrics, current_epoch_nr, 'val')
        return val_metrics

    def test(self):
        test_metrics = self._run_eval(self.test_dataloader)
        self.log_metrics(test_metrics, 0, 'test')
        return test_metrics

    def measure(self, dataloader) -> Dict[str, float]:
        """
        Accuracy, ROC-AUC and loss on any loader in evaluation mode, without logging.
        """
        return self._run_eval(dataloader)
