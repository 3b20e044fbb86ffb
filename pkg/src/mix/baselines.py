"""
Misturas de comparação: InputMixup e CutMix na entrada, RandomChannelMix nas features.
"""

from __future__ import annotations

import math

import numpy as np

from src.errors import ShapeError
from src.mix.catchup import mix_features, mix_labels
from src.mix.plan import MixPlan
from src.tensor.core import Tensor
from src.tensor.ops import index_select_batch


def input_mixup(x: np.ndarray, x_other: np.ndarray, lam: float) -> np.ndarray:
    """Mistura convexa pixel a pixel."""
    x, x_other = np.asarray(x), np.asarray(x_other)
    if x.shape != x_other.shape:
        raise ShapeError(f"input_mixup: formas {x.shape} e {x_other.shape}")
    return (lam * x + (1.0 - lam) * x_other).astype(x.dtype, copy=False)


def cutmix(
    x: np.ndarray,
    x_other: np.ndarray,
    lam: float,
    rng: np.random.Generator,
    center: tuple[int, int] | None = None,
) -> tuple[np.ndarray, float]:
    """Cola em `x` um retângulo de `x_other` com lados proporcionais a √(1−λ).

    O centro é uniforme (ou `center` = (cy, cx)); a caixa é recortada à imagem.
    Vale para uma imagem [C,H,W] ou um batch [B,C,H,W] (mesma caixa).

    Returns:
        (imagens misturadas, λ ajustado = 1 − área colada / (H·W))
    """
    x, x_other = np.asarray(x), np.asarray(x_other)
    if x.shape != x_other.shape:
        raise ShapeError(f"cutmix: formas {x.shape} e {x_other.shape}")
    height, width = x.shape[-2:]
    ratio = math.sqrt(1.0 - lam)
    cut_w, cut_h = int(width * ratio), int(height * ratio)
    if center is None:
        cx, cy = int(rng.integers(width)), int(rng.integers(height))
    else:
        cy, cx = center
    x1, x2 = np.clip([cx - cut_w // 2, cx + cut_w // 2], 0, width)
    y1, y2 = np.clip([cy - cut_h // 2, cy + cut_h // 2], 0, height)

    mixed = x.copy()
    mixed[..., y1:y2, x1:x2] = x_other[..., y1:y2, x1:x2]
    adjusted = 1.0 - float((x2 - x1) * (y2 - y1)) / float(width * height)
    return mixed, adjusted


def random_mask(channels: int, lam: float, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ deve estar em [0, 1], recebeu {lam}")
    n_mix = math.floor(lam * channels)
    mask = np.zeros(channels, dtype=np.uint8)
    mask[rng.choice(channels, size=n_mix, replace=False)] = 1
    return mask, n_mix


def random_channel_mix(
    h: Tensor,
    labels: np.ndarray,
    lam: float,
    rng: np.random.Generator,
    perm: np.ndarray | None = None,
    layer: int = -1,
) -> tuple[Tensor, np.ndarray, MixPlan]:
    """Como `catchup_mix_batch`, mas os floor(λC) canais mantidos são sorteados."""
    batch, channels = h.shape[0], h.shape[1]
    if batch < 2:
        raise ValueError(f"RandomChannelMix exige batch ≥ 2, recebeu {batch}")
    if perm is None:
        perm = rng.permutation(batch)
    perm = np.asarray(perm)

    masks = np.zeros((batch, channels), dtype=np.uint8)
    n_mix = 0
    for i in range(batch):
        masks[i], n_mix = random_mask(channels, lam, rng)

    h_mix = mix_features(h, index_select_batch(h, perm), masks)
    labels = np.asarray(labels)
    y_mix = mix_labels(labels, labels[perm], lam)
    plan = MixPlan(lam=lam, layer=layer, perm=perm, strategy="random_channel", n_mix=n_mix, masks=masks)
    return h_mix, y_mix, plan
