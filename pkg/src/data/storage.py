"""
Datasets em disco.

Dois formatos por diretório de split:
  packed: images.cumten (float32 [N,3,H,W]) + labels.cumten (int64 [N]) + dataset.json
  png:    manifest.csv (relative_path,label) + images/*.png + dataset.json
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.data.dataset import Dataset
from src.data.synthetic import generate_splits, generate_synthetic, split_seeds
from src.errors import ArtifactIntegrityError, DatasetError
from src.models.schemas import DataConfig
from src.tensor.codec import load_tensor, save_tensor

MANIFEST = "manifest.csv"
DESCRIPTOR = "dataset.json"
MANIFEST_HEADER = ["relative_path", "label"]


def save_dataset(dataset: Dataset, directory: str | Path, fmt: str = "packed") -> list[Path]:
    """Grava um split e devolve a lista de arquivos produzidos."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if fmt == "packed":
        save_tensor(directory / "images.cumten", dataset.images.astype(np.float32))
        save_tensor(directory / "labels.cumten", dataset.labels.astype(np.int64))
        written += [directory / "images.cumten", directory / "labels.cumten"]
    elif fmt == "png":
        image_dir = directory / "images"
        image_dir.mkdir(exist_ok=True)
        with open(directory / MANIFEST, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(MANIFEST_HEADER)
            for i, (image, label) in enumerate(zip(dataset.images, dataset.labels)):
                relative = f"images/{i:05d}.png"
                pixels = np.round(image.transpose(1, 2, 0) * 255.0).astype(np.uint8)
                Image.fromarray(pixels).save(directory / relative)
                writer.writerow([relative, int(label)])
                written.append(directory / relative)
        written.append(directory / MANIFEST)
    else:
        raise ValueError(f"formato de dataset desconhecido: {fmt}")

    descriptor = {
        "format": fmt,
        "num_classes": dataset.num_classes,
        "split": dataset.split,
        "provenance": dataset.provenance,
        "count": len(dataset),
        "content_hash": dataset.content_hash(),
    }
    (directory / DESCRIPTOR).write_text(json.dumps(descriptor, indent=2, sort_keys=True), encoding="utf-8")
    written.append(directory / DESCRIPTOR)
    return written


def _read_descriptor(directory: Path) -> dict:
    path = directory / DESCRIPTOR
    if not path.is_file():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DatasetError(f"{path} ilegível: {e}") from e


def _load_png(manifest: Path, num_classes: int | None) -> tuple[np.ndarray, np.ndarray, int]:
    root = manifest.parent
    with open(manifest, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    first_line = 1
    if rows and rows[0] == MANIFEST_HEADER:
        rows, first_line = rows[1:], 2
    numbered = [(line, row) for line, row in enumerate(rows, start=first_line) if row]
    if not numbered:
        raise DatasetError(f"manifesto vazio: {manifest}")

    labels: list[int] = []
    for line, row in numbered:
        if len(row) != 2:
            raise DatasetError(f"{manifest} linha {line}: esperado 'relative_path,label', recebeu {row}")
        try:
            labels.append(int(row[1]))
        except ValueError as e:
            raise DatasetError(f"{manifest} linha {line}: rótulo inválido '{row[1]}'") from e
    n = num_classes if num_classes is not None else max(labels) + 1

    images = []
    for (line, row), label in zip(numbered, labels):
        if not 0 <= label < n:
            raise DatasetError(f"{manifest} linha {line}: rótulo {label} fora de [0, {n})")
        path = root / row[0]
        if not path.is_file():
            raise DatasetError(f"{manifest} linha {line}: imagem ausente {path}")
        try:
            with Image.open(path) as img:
                pixels = np.asarray(img.convert("RGB"), dtype=np.float64)
        except (UnidentifiedImageError, OSError) as e:
            raise DatasetError(f"{manifest} linha {line}: imagem corrompida {path}") from e
        images.append((pixels / 255.0).transpose(2, 0, 1).astype(np.float32))

    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise DatasetError(f"{manifest}: imagens com tamanhos diferentes {sorted(shapes)}")
    return np.stack(images), np.asarray(labels, dtype=np.int64), n


def load_dataset(path: str | Path, num_classes: int | None = None, split: str | None = None) -> Dataset:
    """Carrega um split a partir do diretório ou do manifest.csv.

    Raises:
        DatasetError: arquivo ausente, manifesto vazio, rótulo fora do intervalo
            ou imagem corrompida (a mensagem nomeia a linha).
    """
    path = Path(path)
    directory = path.parent if path.is_file() else path
    if not directory.is_dir():
        raise DatasetError(f"dataset não encontrado: {path}")
    descriptor = _read_descriptor(directory)
    if num_classes is None and "num_classes" in descriptor:
        num_classes = int(descriptor["num_classes"])
    split = split or descriptor.get("split") or directory.name

    manifest = path if path.is_file() else directory / MANIFEST
    if manifest.is_file():
        images, labels, n = _load_png(manifest, num_classes)
    elif (directory / "images.cumten").is_file() and (directory / "labels.cumten").is_file():
        try:
            images = load_tensor(directory / "images.cumten")
            labels = load_tensor(directory / "labels.cumten").astype(np.int64)
        except ArtifactIntegrityError as e:
            raise DatasetError(f"tensores do dataset corrompidos em {directory}: {e}") from e
        if labels.size == 0:
            raise DatasetError(f"dataset vazio em {directory}")
        n = num_classes if num_classes is not None else int(labels.max()) + 1
        bad = np.flatnonzero((labels < 0) | (labels >= n))
        if bad.size:
            raise DatasetError(f"{directory}: amostra {int(bad[0])} com rótulo {int(labels[bad[0]])} fora de [0, {n})")
    else:
        raise DatasetError(f"nenhum {MANIFEST} nem images.cumten/labels.cumten em {directory}")

    return Dataset(images, labels, n, split=split, provenance=str(path))


def load_splits(root: str | Path, num_classes: int | None = None) -> dict[str, Dataset]:
    """Carrega train/, val/ e test/ de uma raiz gerada por gen-data."""
    root = Path(root)
    return {split: load_dataset(root / split, num_classes, split=split) for split in ("train", "val", "test")}


def datasets_from_config(config: DataConfig, seed: int) -> dict[str, Dataset]:
    """Splits descritos na seção data.* da configuração."""
    if config.source == "disk":
        return load_splits(config.root, config.classes)
    return generate_splits(
        config.classes,
        config.per_class_train,
        config.per_class_val,
        config.per_class_test,
        config.image_size,
        seed,
    )


def dataset_split(config: DataConfig, seed: int, split: str) -> Dataset:
    """Um único split (test para avaliação) sem gerar os demais."""
    if config.source == "disk":
        return load_dataset(Path(config.root) / split, config.classes, split=split)
    sizes = {"train": config.per_class_train, "val": config.per_class_val, "test": config.per_class_test}
    return generate_synthetic(config.classes, sizes[split], config.image_size, split_seeds(seed)[split], split=split)


def disjoint_synthetic(config: DataConfig, seed: int) -> Dataset:
    """Conjunto fora de distribuição: classes deslocadas além das de treino, semente própria."""
    ood_seed = split_seeds(seed + 1)["test"]
    return generate_synthetic(
        config.classes,
        config.per_class_test,
        config.image_size,
        ood_seed,
        split="ood",
        class_offset=config.classes,
    )
