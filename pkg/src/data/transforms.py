"""
Transformações de imagem [C, H, W] em [0, 1]: deformações afins, corrupções
parametrizadas por severidade e o aumento padrão de treino.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from src.models.schemas import CorruptionSpec, DeformSpec

# Grade de avaliação: rotação e cisalhamento sorteados por imagem em [−m, +m]; zoom fixo.
DEFORMATION_GRID: tuple[DeformSpec, ...] = (
    DeformSpec(kind="rotate", magnitude=20, randomized=True),
    DeformSpec(kind="rotate", magnitude=40, randomized=True),
    DeformSpec(kind="shear", magnitude=28.6, randomized=True),
    DeformSpec(kind="shear", magnitude=57.2, randomized=True),
    DeformSpec(kind="zoom", magnitude=60),
    DeformSpec(kind="zoom", magnitude=80),
    DeformSpec(kind="zoom", magnitude=120),
    DeformSpec(kind="zoom", magnitude=140),
)

# Medida de distorção por severidade 1..5
CORRUPTION_LEVELS: dict[str, tuple[float, ...]] = {
    "gaussian_noise": (0.04, 0.06, 0.08, 0.09, 0.10),  # desvio padrão
    "gaussian_blur": (0.4, 0.6, 0.7, 0.8, 1.0),  # sigma em pixels
    "brightness": (0.05, 0.10, 0.15, 0.20, 0.30),  # delta somado
    "contrast": (0.75, 0.50, 0.40, 0.30, 0.15),  # fator sobre a média
}

CORRUPTION_GRID: tuple[CorruptionSpec, ...] = tuple(
    CorruptionSpec(kind=kind, severity=severity)
    for kind in CORRUPTION_LEVELS
    for severity in range(1, 6)
)

PAD = 4


def _forward_matrix(spec: DeformSpec, magnitude: float) -> np.ndarray:
    """Matriz 2×2 em coordenadas (linha, coluna) que leva a imagem original na deformada."""
    if spec.kind == "rotate":
        a = np.deg2rad(magnitude)
        return np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    if spec.kind == "shear":
        return np.array([[1.0, 0.0], [np.tan(np.deg2rad(magnitude)), 1.0]])
    return np.eye(2) * (magnitude / 100.0)


def deform(img: np.ndarray, spec: DeformSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Transformação afim em torno do centro, bilinear, preenchimento com 0.

    Com `spec.randomized` a magnitude é sorteada em [−m, +m] com `rng`.
    """
    magnitude = spec.magnitude
    if spec.randomized:
        if rng is None:
            raise ValueError(f"deformação aleatória {spec.label} exige um gerador")
        magnitude = float(rng.uniform(-spec.magnitude, spec.magnitude))

    inverse = np.linalg.inv(_forward_matrix(spec, magnitude))
    center = (np.array(img.shape[-2:], dtype=np.float64) - 1.0) / 2.0
    offset = center - inverse @ center
    out = np.stack([
        ndimage.affine_transform(
            channel.astype(np.float64), inverse, offset=offset, order=1, mode="constant", cval=0.0,
        )
        for channel in img
    ])
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def corrupt(img: np.ndarray, spec: CorruptionSpec, rng: np.random.Generator) -> np.ndarray:
    level = CORRUPTION_LEVELS[spec.kind][spec.severity - 1]
    x = img.astype(np.float64)
    if spec.kind == "gaussian_noise":
        out = x + rng.normal(0.0, level, x.shape)
    elif spec.kind == "gaussian_blur":
        out = ndimage.gaussian_filter(x, sigma=(0.0, level, level), mode="reflect")
    elif spec.kind == "brightness":
        out = x + level
    else:
        mean = x.mean()
        out = (x - mean) * level + mean
    return np.clip(out, 0.0, 1.0).astype(img.dtype)


def apply_transform(
    img: np.ndarray,
    transform: DeformSpec | CorruptionSpec | None,
    rng: np.random.Generator | None,
) -> np.ndarray:
    if transform is None:
        return img
    if isinstance(transform, DeformSpec):
        return deform(img, transform, rng)
    return corrupt(img, transform, rng)


def standard_augment(
    img: np.ndarray,
    rng: np.random.Generator,
    flip: bool | None = None,
    offset: tuple[int, int] | None = None,
) -> np.ndarray:
    """Espelhamento horizontal (p=0.5) e recorte após padding de 4 pixels com zeros.

    `flip` e `offset` (dy, dx em 0..8) forçam o sorteio; offset (4, 4) é o recorte central.
    """
    if flip is None:
        flip = bool(rng.random() < 0.5)
    if offset is None:
        offset = (int(rng.integers(0, 2 * PAD + 1)), int(rng.integers(0, 2 * PAD + 1)))
    out = img[..., ::-1] if flip else img
    height, width = img.shape[-2:]
    padded = np.pad(out, ((0, 0), (PAD, PAD), (PAD, PAD)))
    dy, dx = offset
    return np.ascontiguousarray(padded[:, dy:dy + height, dx:dx + width])
