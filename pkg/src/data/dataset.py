"""
Dataset em memória e iteração em batches.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from src.errors import DatasetError


class Sample(NamedTuple):
    image: np.ndarray  # [3, H, W] em [0, 1]
    label: int


@dataclass
class Dataset:
    images: np.ndarray  # [N, 3, H, W] float32
    labels: np.ndarray  # [N] int64
    num_classes: int
    split: str = "train"
    provenance: str = ""

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise DatasetError(f"imagens devem ter forma [N,C,H,W], recebeu {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError(f"{self.images.shape[0]} imagens para {self.labels.shape[0]} rótulos")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(f"rótulos fora de [0, {self.num_classes})")
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DatasetError("pixels fora de [0, 1]")
        if self.split == "train" and len(self) and np.any(self.class_counts() == 0):
            missing = np.flatnonzero(self.class_counts() == 0).tolist()
            raise DatasetError(f"split de treino sem amostras das classes {missing}")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __getitem__(self, index: int) -> Sample:
        return Sample(self.images[index], int(self.labels[index]))

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])  # type: ignore[return-value]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(str((self.num_classes, self.images.shape)).encode())
        digest.update(np.ascontiguousarray(self.images).tobytes())
        digest.update(np.ascontiguousarray(self.labels).tobytes())
        return digest.hexdigest()

    def subset(self, indices: np.ndarray | list[int], split: str | None = None) -> Dataset:
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.images[indices],
            self.labels[indices],
            self.num_classes,
            split=split or self.split,
            provenance=f"{self.provenance}[subset {len(indices)}]",
        )


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), num_classes), dtype=np.float64)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def iterate_batches(
    dataset: Dataset,
    batch_size: int,
    rng: np.random.Generator | None = None,
    augment: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None,
    min_size: int = 1,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Percorre o dataset em batches (images, labels).

    Com `rng` a ordem é embaralhada e `augment` (se houver) é aplicado por
    imagem com o mesmo gerador, na ordem do batch. Um batch final menor que
    `min_size` é descartado.
    """
    order = rng.permutation(len(dataset)) if rng is not None else np.arange(len(dataset))
    for start in range(0, len(order), batch_size):
        index = order[start:start + batch_size]
        if len(index) < min_size:
            break
        images = dataset.images[index]
        if augment is not None and rng is not None:
            images = np.stack([augment(img, rng) for img in images])
        yield images, dataset.labels[index]
