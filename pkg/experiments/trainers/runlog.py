from dataclasses import dataclass
from typing import List
import time
import os

import pandas as pd

COLUMNS = ("iteration", "wasserstein", "d_loss", "g_loss")


@dataclass(frozen=True)
class RunLogRow:
    iteration: int
    wasserstein: float
    d_loss: float
    g_loss: float
    timestamp: float


class RunLog:
    """
    Append-only per-iteration record of an adversarial run.

    The CSV form holds the deterministic columns only; wall-clock timestamps
    stay in memory and are forced monotone.
    """

    def __init__(self):
        self.rows: List[RunLogRow] = []
        self.checkpoints: List[str] = []

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, iteration: int, wasserstein: float, d_loss: float, g_loss: float) -> RunLogRow:
        if self.rows and iteration <= self.rows[-1].iteration:
            raise ValueError(f"RunLog is append-only: iteration {iteration} after {self.rows[-1].iteration}")
        now = time.time()
        if self.rows:
            now = max(now, self.rows[-1].timestamp)
        row = RunLogRow(int(iteration), float(wasserstein), float(d_loss), float(g_loss), now)
        self.rows.append(row)
        return row

    def add_checkpoint(self, path: str) -> None:
        self.checkpoints.append(path)

    def tail(self, n: int = 10) -> List[dict]:
        return [{c: getattr(row, c) for c in COLUMNS} for row in self.rows[-n:]]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([[getattr(row, c) for c in COLUMNS] for row in self.rows], columns=list(COLUMNS))

    def write_csv(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    @classmethod
    def read_csv(cls, path: str) -> "RunLog":
        frame = pd.read_csv(path, float_precision="round_trip")
        missing = set(COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"RunLog file {path} lacks columns {sorted(missing)}")
        runlog = cls()
        for row in frame.itertuples(index=False):
            runlog.append(row.iteration, row.wasserstein, row.d_loss, row.g_loss)
        return runlog
