"""
Robustez: FGSM, acurácia sob deformações e corrupções, e mCE.

Acurácias em porcentagem. A rede é somente leitura aqui: cada thread usa sua
própria fita e nenhum parâmetro recebe gradiente.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from src.data.dataset import Dataset, one_hot
from src.data.transforms import CORRUPTION_GRID, DEFORMATION_GRID, apply_transform
from src.eval.parallel import parallel_map
from src.models.schemas import CorruptionSpec, DeformSpec, RobustnessReport
from src.nn.network import Network
from src.tensor.core import Tensor, backward, no_grad, reset_tape
from src.tensor.ops import softmax_cross_entropy

Model = Callable[[Tensor], Tensor]


def _chunks(n: int, batch_size: int) -> list[slice]:
    return [slice(start, min(start + batch_size, n)) for start in range(0, n, batch_size)]


def fgsm(model: Model, x: np.ndarray, labels: np.ndarray, epsilon: float) -> np.ndarray:
    """x_adv = clip(x + ε·sign(∇ₓ L(f(x), y)), 0, 1).

    Raises:
        ValueError: ε < 0.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon deve ser ≥ 0, recebeu {epsilon}")
    x = np.asarray(x)
    if epsilon == 0:
        return x.copy()
    if isinstance(model, Network):
        model.eval()
    reset_tape()
    xt = Tensor(x, requires_grad=True)
    logits = model(xt)
    loss = softmax_cross_entropy(logits, one_hot(labels, logits.shape[1]))
    grads = backward(loss, wrt=[xt])
    reset_tape()
    grad = grads.get(xt, np.zeros_like(x))
    return np.clip(x + epsilon * np.sign(grad), 0.0, 1.0).astype(x.dtype)


def predict(net: Network, images: np.ndarray, batch_size: int = 128) -> np.ndarray:
    """Classe prevista por imagem (batches em paralelo, ordem preservada)."""
    net.eval()

    def run(chunk: slice) -> np.ndarray:
        with no_grad():
            return np.argmax(net.forward(Tensor(images[chunk])).data, axis=1)

    parts = parallel_map(run, _chunks(len(images), batch_size))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def transformed_images(
    dataset: Dataset,
    transform: DeformSpec | CorruptionSpec | None,
    seed: int,
) -> np.ndarray:
    if transform is None:
        return dataset.images
    rng = np.random.default_rng(seed)
    return np.stack([apply_transform(img, transform, rng) for img in dataset.images])


def eval_accuracy(
    net: Network,
    dataset: Dataset,
    transform: DeformSpec | CorruptionSpec | None = None,
    seed: int = 1234,
    batch_size: int = 128,
) -> float:
    """Top-1 (%) no dataset, opcionalmente transformado com o gerador `seed`."""
    if len(dataset) == 0:
        raise ValueError("dataset vazio")
    predictions = predict(net, transformed_images(dataset, transform, seed), batch_size)
    return 100.0 * float(np.mean(predictions == dataset.labels))


def fgsm_accuracy(net: Network, dataset: Dataset, epsilon: float, batch_size: int = 128) -> float:
    if len(dataset) == 0:
        raise ValueError("dataset vazio")
    if epsilon < 0:
        raise ValueError(f"epsilon deve ser ≥ 0, recebeu {epsilon}")
    net.eval()

    def run(chunk: slice) -> int:
        adversarial = fgsm(net, dataset.images[chunk], dataset.labels[chunk], epsilon)
        with no_grad():
            predictions = np.argmax(net.forward(Tensor(adversarial)).data, axis=1)
        return int(np.sum(predictions == dataset.labels[chunk]))

    correct = parallel_map(run, _chunks(len(dataset), batch_size))
    return 100.0 * sum(correct) / len(dataset)


def deformation_suite(
    net: Network,
    dataset: Dataset,
    seed: int = 1234,
    grid: Sequence[DeformSpec] = DEFORMATION_GRID,
    batch_size: int = 128,
) -> dict[str, float]:
    """Acurácia por deformação, na ordem da grade."""
    return {spec.label: eval_accuracy(net, dataset, spec, seed, batch_size) for spec in grid}


def corruption_suite(
    net: Network,
    dataset: Dataset,
    seed: int = 1234,
    grid: Sequence[CorruptionSpec] = CORRUPTION_GRID,
    batch_size: int = 128,
) -> dict[str, list[float]]:
    """Erro top-1 (%) por tipo de corrupção, uma entrada por severidade."""
    errors: dict[str, list[float]] = {}
    for spec in grid:
        errors.setdefault(spec.kind, []).append(100.0 - eval_accuracy(net, dataset, spec, seed, batch_size))
    return errors


def mean_corruption_error(errors: Mapping[str, Iterable[float]] | Iterable[Iterable[float]] | Iterable[float]) -> float:
    """Média aritmética das células (tipo, severidade); independe da ordem das células."""
    rows = errors.values() if isinstance(errors, Mapping) else errors
    cells: list[float] = []
    for row in rows:
        if isinstance(row, (int, float, np.floating, np.integer)):
            cells.append(float(row))
        else:
            cells.extend(float(v) for v in row)
    if not cells:
        raise ValueError("matriz de erros vazia")
    return math.fsum(cells) / len(cells)


def robustness_report(
    net: Network,
    dataset: Dataset,
    seed: int = 1234,
    fgsm_epsilon: float | None = None,
    deform: bool = False,
    corrupt: bool = False,
    batch_size: int = 128,
) -> RobustnessReport:
    report = RobustnessReport(clean_accuracy=eval_accuracy(net, dataset, None, seed, batch_size))
    if fgsm_epsilon is not None:
        report.fgsm_epsilon = fgsm_epsilon
        report.fgsm_accuracy = fgsm_accuracy(net, dataset, fgsm_epsilon, batch_size)
    if deform:
        report.deformation = deformation_suite(net, dataset, seed, batch_size=batch_size)
    if corrupt:
        report.corruption_errors = corruption_suite(net, dataset, seed, batch_size=batch_size)
        report.mean_corruption_error = mean_corruption_error(report.corruption_errors)
    return report
