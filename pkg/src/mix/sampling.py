"""Sorteio do coeficiente de mistura λ e da fronteira k."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def sample_lambda(alpha: float, rng: np.random.Generator) -> float:
    """λ ~ Beta(α, α)."""
    if not alpha > 0:
        raise ValueError(f"alpha deve ser > 0, recebeu {alpha}")
    return float(rng.beta(alpha, alpha))


def sample_layer(layer_set: Sequence[int], rng: np.random.Generator) -> int:
    """k uniforme sobre o conjunto de fronteiras."""
    if len(layer_set) == 0:
        raise ValueError("conjunto de camadas de mistura vazio")
    return int(layer_set[int(rng.integers(len(layer_set)))])
