"""
Gerador procedural "synthetic-N".

A classe c define quatro pistas independentes:
  forma    = c mod 4  (disco, quadrado, cruz, anel)
  textura  = c mod 3  (frequência das listras)
  paleta   = c mod 5  (cores de frente e fundo)
  posição  = c mod 2  (deslocamento horizontal do objeto)
Cada pista é trocada por um valor aleatório com probabilidade CUE_NOISE,
então nenhuma pista isolada basta para classificar todas as amostras.
"""

from __future__ import annotations

import numpy as np

from src.data.dataset import Dataset
from src.errors import ConfigError

SHAPES = ("disk", "square", "cross", "ring")
FREQUENCIES = (2.0, 4.0, 7.0)
PALETTES = np.array([
    [[0.90, 0.20, 0.20], [0.15, 0.20, 0.35]],
    [[0.20, 0.80, 0.30], [0.35, 0.15, 0.20]],
    [[0.25, 0.35, 0.95], [0.30, 0.30, 0.10]],
    [[0.95, 0.85, 0.20], [0.10, 0.25, 0.30]],
    [[0.80, 0.30, 0.90], [0.20, 0.35, 0.15]],
])
CUE_CARDINALITY = (len(SHAPES), len(FREQUENCIES), len(PALETTES), 2)
CUE_NOISE = 0.15
PIXEL_NOISE = 0.04


def class_cues(cls: int) -> tuple[int, int, int, int]:
    return tuple(cls % n for n in CUE_CARDINALITY)  # type: ignore[return-value]


def _shape_mask(kind: str, dy: np.ndarray, dx: np.ndarray, radius: float) -> np.ndarray:
    if kind == "disk":
        return dy ** 2 + dx ** 2 <= radius ** 2
    if kind == "square":
        return np.maximum(np.abs(dy), np.abs(dx)) <= 0.85 * radius
    if kind == "cross":
        arm = 0.35 * radius
        return ((np.abs(dy) <= arm) & (np.abs(dx) <= radius)) | ((np.abs(dx) <= arm) & (np.abs(dy) <= radius))
    dist2 = dy ** 2 + dx ** 2
    return (dist2 <= radius ** 2) & (dist2 >= (0.55 * radius) ** 2)


def render(cues: tuple[int, int, int, int], size: int, rng: np.random.Generator) -> np.ndarray:
    """Desenha uma imagem [3, size, size] em [0, 1] quantizada em 1/255."""
    shape_id, freq_id, palette_id, position_id = cues
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    shift = size / 8 * (1 if position_id else -1)
    cy = size / 2 + rng.uniform(-2, 2)
    cx = size / 2 + shift + rng.uniform(-2, 2)
    radius = size * rng.uniform(0.22, 0.30)
    theta = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)

    stripes = 0.5 + 0.5 * np.sin(
        2 * np.pi * FREQUENCIES[freq_id] * (xx * np.cos(theta) + yy * np.sin(theta)) / size + phase
    )
    mask = _shape_mask(SHAPES[shape_id], yy - cy, xx - cx, radius)
    fg, bg = PALETTES[palette_id]
    img = np.where(
        mask[None],
        fg[:, None, None] * (0.55 + 0.45 * stripes)[None],
        bg[:, None, None] * (0.85 + 0.15 * stripes)[None],
    )
    img = img + rng.normal(0.0, PIXEL_NOISE, img.shape)
    return (np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def _noisy_cues(cls: int, rng: np.random.Generator) -> tuple[int, int, int, int]:
    cues = list(class_cues(cls))
    for i, cardinality in enumerate(CUE_CARDINALITY):
        if rng.random() < CUE_NOISE:
            cues[i] = int(rng.integers(cardinality))
    return tuple(cues)  # type: ignore[return-value]


def generate_synthetic(
    classes: int,
    per_class: int,
    image_size: int,
    seed: int,
    split: str = "train",
    class_offset: int = 0,
) -> Dataset:
    """Gera `classes × per_class` amostras balanceadas, determinísticas por seed.

    Args:
        class_offset: desloca as pistas (classe c desenhada como c + offset);
            usado para criar um conjunto fora de distribuição com classes disjuntas.

    Raises:
        ConfigError: classes < 2 ou image_size < 8.
    """
    if classes < 2:
        raise ConfigError(f"são necessárias ao menos 2 classes, recebeu {classes}", key="data.classes")
    if image_size < 8:
        raise ConfigError(f"image_size deve ser ≥ 8, recebeu {image_size}", key="data.image_size")
    rng = np.random.default_rng(seed)
    images = np.empty((classes * per_class, 3, image_size, image_size), dtype=np.float32)
    labels = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    for i, cls in enumerate(labels):
        images[i] = render(_noisy_cues(int(cls) + class_offset, rng), image_size, rng)
    provenance = f"synthetic:seed={seed}:offset={class_offset}"
    return Dataset(images, labels, classes, split=split, provenance=provenance)


SPLITS = ("train", "val", "test")


def split_seeds(seed: int) -> dict[str, int]:
    """Sementes independentes por split derivadas de uma só."""
    children = np.random.SeedSequence(seed).spawn(len(SPLITS))
    return {split: int(child.generate_state(1)[0]) for split, child in zip(SPLITS, children)}


def generate_splits(
    classes: int,
    per_class_train: int,
    per_class_val: int,
    per_class_test: int,
    image_size: int,
    seed: int,
) -> dict[str, Dataset]:
    seeds = split_seeds(seed)
    sizes = {"train": per_class_train, "val": per_class_val, "test": per_class_test}
    return {
        split: generate_synthetic(classes, sizes[split], image_size, seeds[split], split=split)
        for split in SPLITS
    }
