"""
Catch-up Mix: troca, no par (origem, alvo), os canais em que a origem é
relativamente mais dominante pelos canais correspondentes do alvo.

Pipeline por par:
  FI_c   = ‖h_c‖₂                               (filter_influence)
  RFI_c  = FI_c/ΣFI − FI'_c/ΣFI'                (relative_filter_influence)
  M      = 1 nos floor(λC) canais de menor RFI   (build_mask)
  h_mix  = M⊙h + (1−M)⊙h'                       (mix_features)
"""

from __future__ import annotations

import math

import numpy as np

from src.errors import DegenerateInfluenceError, ShapeError
from src.mix.plan import MixPlan
from src.tensor.core import Tensor
from src.tensor.ops import index_select_batch


def filter_influence(h: Tensor | np.ndarray) -> np.ndarray:
    """Norma ℓ2 de cada canal de um mapa [C, H, W] (float64)."""
    data = h.data if isinstance(h, Tensor) else np.asarray(h)
    if data.ndim != 3:
        raise ShapeError(f"filter_influence espera um mapa [C,H,W], recebeu {data.shape}")
    data = data.astype(np.float64, copy=False)
    if not np.all(np.isfinite(data)):
        raise ValueError("mapa de ativação com NaN ou Inf")
    return np.sqrt(np.sum(data * data, axis=(1, 2)))


def relative_filter_influence(fi: np.ndarray, fi_other: np.ndarray) -> np.ndarray:
    """RFI positiva: canal mais importante para a origem que para o alvo.

    Raises:
        ShapeError: vetores de tamanhos diferentes.
        DegenerateInfluenceError: soma nula em algum dos vetores.
    """
    fi = np.asarray(fi, dtype=np.float64)
    fi_other = np.asarray(fi_other, dtype=np.float64)
    if fi.shape != fi_other.shape or fi.ndim != 1:
        raise ShapeError(f"influências com formas {fi.shape} e {fi_other.shape}")
    total, total_other = fi.sum(), fi_other.sum()
    if total <= 0 or total_other <= 0:
        raise DegenerateInfluenceError("soma das influências de filtro é zero")
    return fi / total - fi_other / total_other


def build_mask(rfi: np.ndarray, lam: float) -> tuple[np.ndarray, int]:
    """Máscara binária com floor(λC) uns nos canais de menor RFI.

    Empates são resolvidos pelo menor índice de canal (ordenação estável).

    Returns:
        (máscara uint8 [C], N_mix)
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"λ deve estar em [0, 1], recebeu {lam}")
    rfi = np.asarray(rfi)
    channels = rfi.shape[0]
    n_mix = math.floor(lam * channels)
    mask = np.zeros(channels, dtype=np.uint8)
    mask[np.argsort(rfi, kind="stable")[:n_mix]] = 1
    return mask, n_mix


def _full_mask(mask: np.ndarray, shape: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
    """Expande uma máscara [C] ou [B,C] para a forma do mapa."""
    batch_axis = len(shape) == 4
    channels = shape[1] if batch_axis else shape[0]
    if mask.shape[-1] != channels:
        raise ShapeError(f"máscara com {mask.shape[-1]} canais para mapa {shape}")
    if mask.ndim == 2:
        if not batch_axis or mask.shape[0] != shape[0]:
            raise ShapeError(f"máscara por amostra {mask.shape} para mapa {shape}")
        expanded = mask[:, :, None, None]
    elif batch_axis:
        expanded = mask[None, :, None, None]
    else:
        expanded = mask[:, None, None]
    return np.broadcast_to(expanded.astype(dtype), shape).copy()


def mix_features(h: Tensor, h_other: Tensor, mask: np.ndarray) -> Tensor:
    """h_mix = M⊙h + (1−M)⊙h'; a máscara é constante, o gradiente chega a h e h'."""
    h = h if isinstance(h, Tensor) else Tensor(h)
    h_other = h_other if isinstance(h_other, Tensor) else Tensor(h_other, dtype=h.dtype)
    if h.shape != h_other.shape:
        raise ShapeError(f"mix_features: formas {h.shape} e {h_other.shape}")
    keep = _full_mask(np.asarray(mask), h.shape, h.dtype)
    return h * Tensor(keep) + h_other * Tensor(1 - keep)


def mix_labels(y: np.ndarray, y_other: np.ndarray, lam: float) -> np.ndarray:
    """y_mix = λy + (1−λ)y' (posições onde y == y' ficam intactas)."""
    y = np.asarray(y, dtype=np.float64)
    y_other = np.asarray(y_other, dtype=np.float64)
    if y.shape != y_other.shape:
        raise ShapeError(f"rótulos com formas {y.shape} e {y_other.shape}")
    return np.where(y == y_other, y, lam * y + (1.0 - lam) * y_other)


def pair_mask(h: np.ndarray, h_other: np.ndarray, lam: float) -> tuple[np.ndarray, int]:
    """Máscara de um par; mapa nulo em qualquer lado dá RFI = 0."""
    try:
        rfi = relative_filter_influence(filter_influence(h), filter_influence(h_other))
    except DegenerateInfluenceError:
        rfi = np.zeros(h.shape[0])
    return build_mask(rfi, lam)


def catchup_mix_batch(
    h: Tensor,
    labels: np.ndarray,
    lam: float,
    rng: np.random.Generator,
    perm: np.ndarray | None = None,
    layer: int = -1,
) -> tuple[Tensor, np.ndarray, MixPlan]:
    """Catch-up Mix sobre um batch [B,C,H,W] com um único λ.

    Args:
        h: mapa de ativação na fronteira sorteada (com fita).
        labels: rótulos suaves [B, N].
        lam: coeficiente de mistura compartilhado pelo batch.
        rng: gerador usado para a permutação do batch.
        perm: permutação imposta (pula o sorteio).
        layer: fronteira k, só para o MixPlan.

    Returns:
        (h_mix, y_mix, plano)
    """
    batch = h.shape[0]
    if batch < 2:
        raise ValueError(f"Catch-up Mix exige batch ≥ 2, recebeu {batch}")
    if perm is None:
        perm = rng.permutation(batch)
    perm = np.asarray(perm)

    data = h.data
    masks = np.zeros((batch, h.shape[1]), dtype=np.uint8)
    n_mix = 0
    for i in range(batch):
        masks[i], n_mix = pair_mask(data[i], data[perm[i]], lam)

    h_mix = mix_features(h, index_select_batch(h, perm), masks)
    labels = np.asarray(labels)
    y_mix = mix_labels(labels, labels[perm], lam)
    plan = MixPlan(lam=lam, layer=layer, perm=perm, strategy="catchup", n_mix=n_mix, masks=masks)
    return h_mix, y_mix, plan
