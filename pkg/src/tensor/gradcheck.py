"""
Verificação de gradientes por diferenças centrais.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from src.tensor.core import Tensor, backward, no_grad, reset_tape


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max|a − n| / max(max|a|, max|n|, 1e-12)."""
    scale = max(float(np.max(np.abs(analytic), initial=0.0)), float(np.max(np.abs(numeric), initial=0.0)), 1e-12)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def numerical_gradient(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    index: int,
    step: float = 1e-3,
) -> np.ndarray:
    """Gradiente de `fn` em relação a `inputs[index]` por diferenças centrais."""
    base = [np.array(a, copy=True) for a in inputs]
    target = base[index]
    grad = np.zeros_like(target)
    flat = target.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = fn(*[Tensor(a) for a in base]).item()
            flat[i] = original - step
            minus = fn(*[Tensor(a) for a in base]).item()
            flat[i] = original
            grad.reshape(-1)[i] = (plus - minus) / (2.0 * step)
    return grad


def analytic_gradients(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    reset_tape()
    tensors = [Tensor(a, requires_grad=True) for a in inputs]
    loss = fn(*tensors)
    backward(loss)
    grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]
    reset_tape()
    return grads


def gradcheck(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    step: float = 1e-3,
) -> float:
    """Compara gradientes analíticos e numéricos de uma função escalar.

    Returns:
        Maior erro relativo entre todos os argumentos.
    """
    analytic = analytic_gradients(fn, inputs)
    return max(
        relative_error(analytic[i], numerical_gradient(fn, inputs, i, step))
        for i in range(len(inputs))
    )
