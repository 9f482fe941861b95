from abc import ABC
from typing import Iterator, Optional, Tuple
import numpy as np

from geometry.cloud import LabeledCloudSet


class BatchLoader:
    """
    Iterates (clouds, labels) batches of a LabeledCloudSet.

    The order is reshuffled from `rng` at the start of every pass when
    shuffle is set, so a fixed stream gives a fixed sequence of epochs.
    """

    def __init__(self, dataset: LabeledCloudSet, batch_size: int, shuffle: bool = True,
                 rng: Optional[np.random.Generator] = None, drop_last: bool = False):
        if batch_size < 1:
            raise ValueError(f"Batch size must be >= 1, got {batch_size}")
        if shuffle and rng is None:
            raise ValueError("A shuffling loader needs a random stream")
        self.dataset = dataset
        self.batch_size = batch_size
        self.shuffle = shuffle
        self.rng = rng
        self.drop_last = drop_last

    def __len__(self) -> int:
        full, rest = divmod(len(self.dataset), self.batch_size)
        return full if self.drop_last or rest == 0 else full + 1

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        order = self.rng.permutation(len(self.dataset)) if self.shuffle else np.arange(len(self.dataset))
        for start in range(0, len(order), self.batch_size):
            index = order[start:start + self.batch_size]
            if self.drop_last and len(index) < self.batch_size:
                break
            yield self.dataset.clouds[index], self.dataset.labels[index]


class Dataloader(ABC):
    def __init__(self, data_path, split, batch_size, shuffle=True):
        self.data_path = data_path
        self.split = split
        self.batch_size = batch_size
        self.shuffle = shuffle

    def load(self) -> LabeledCloudSet:
        raise NotImplementedError

    def create_dataloader(self, rng: Optional[np.random.Generator] = None) -> BatchLoader:
        """
        Wrap the loaded split into a batch iterator.

        Args:
            rng: Stream used for shuffling.

        Returns:
            batch loader over the split
        """
        return BatchLoader(self.load(), self.batch_size, shuffle=self.shuffle, rng=rng)
