"""
Arquiteturas de referência.

tiny-4: stem 3→16 e estágios 16→32, 32→64, 64→128 (conv 3×3, BN, ReLU,
max-pool 2×2), seguidos de um bloco residual 128→128 sem pooling.
Com entrada 32×32 as fronteiras ficam:
  k=1 [16,16,16]  k=2 [32,8,8]  k=3 [64,4,4]  k=4 [128,2,2]  k=5 [128,2,2]
"""

from __future__ import annotations

from typing import Callable

from src.errors import ConfigError
from src.models.schemas import BlockSpec, NetworkSpec


def tiny4(num_classes: int = 8) -> NetworkSpec:
    widths = [16, 32, 64, 128]
    blocks = []
    in_channels = 3
    for width in widths:
        blocks.append(BlockSpec(in_channels=in_channels, out_channels=width, pool="max"))
        in_channels = width
    blocks.append(BlockSpec(in_channels=128, out_channels=128, residual=True))
    return NetworkSpec(name="tiny-4", in_channels=3, num_classes=num_classes, blocks=blocks)


def tiny2(num_classes: int = 4) -> NetworkSpec:
    """Rede de dois blocos para testes rápidos e verificação de gradientes."""
    return NetworkSpec(
        name="tiny-2",
        in_channels=3,
        num_classes=num_classes,
        blocks=[
            BlockSpec(in_channels=3, out_channels=4, pool="max"),
            BlockSpec(in_channels=4, out_channels=6, residual=True),
        ],
    )


PRESETS: dict[str, Callable[[int], NetworkSpec]] = {
    "tiny-4": tiny4,
    "tiny-2": tiny2,
}


def get_preset(name: str, num_classes: int) -> NetworkSpec:
    if name not in PRESETS:
        raise ConfigError(
            f"rede desconhecida '{name}' (disponíveis: {', '.join(sorted(PRESETS))})",
            key="network.name",
        )
    return PRESETS[name](num_classes)
