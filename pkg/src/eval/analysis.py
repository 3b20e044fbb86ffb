"""
Diagnósticos: curvas de dependência do vetor latente, histogramas de normas
ativação × gradiente por filtro e superfície de perda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from src.data.dataset import Dataset, iterate_batches, one_hot
from src.errors import LayerIndexError
from src.eval.parallel import parallel_map
from src.nn.network import Network
from src.tensor.core import Tensor, backward, no_grad, reset_tape
from src.tensor.ops import global_avg_pool, softmax_cross_entropy

RELIANCE_FRACTIONS: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(20))
DIRECTIONS = ("drop_from_top", "drop_from_bottom")


# --- dependência do vetor latente -----------------------------------------------

@dataclass
class RelianceCurve:
    direction: str
    fractions: list[float]
    accuracies: list[float]


def drop_latent(latent: np.ndarray, fraction: float, direction: str) -> np.ndarray:
    """Zera, por amostra, a fração de dimensões de maior (ou menor) valor."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fração deve estar em [0, 1], recebeu {fraction}")
    if direction not in DIRECTIONS:
        raise ValueError(f"direção desconhecida: {direction}")
    n_drop = math.floor(fraction * latent.shape[1] + 1e-9)
    if n_drop == 0:
        return latent
    keys = -latent if direction == "drop_from_top" else latent
    index = np.argsort(keys, axis=1, kind="stable")[:, :n_drop]
    out = latent.copy()
    np.put_along_axis(out, index, 0.0, axis=1)
    return out


def latent_batches(net: Network, dataset: Dataset, batch_size: int = 128) -> list[tuple[np.ndarray, np.ndarray]]:
    """Vetores latentes e rótulos, batch a batch (mesma partição da avaliação)."""
    net.eval()
    chunks = [slice(s, min(s + batch_size, len(dataset))) for s in range(0, len(dataset), batch_size)]

    def run(chunk: slice) -> tuple[np.ndarray, np.ndarray]:
        with no_grad():
            return net.latent(Tensor(dataset.images[chunk])).data, dataset.labels[chunk]

    return parallel_map(run, chunks)


def head_accuracy(net: Network, batches: Sequence[tuple[np.ndarray, np.ndarray]], fraction: float, direction: str) -> float:
    correct = total = 0
    with no_grad():
        for latent, labels in batches:
            logits = net.head(Tensor(drop_latent(latent, fraction, direction)))
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
            total += len(labels)
    return 100.0 * correct / total


def feature_reliance(
    net: Network,
    dataset: Dataset,
    direction: str,
    fractions: Sequence[float] = RELIANCE_FRACTIONS,
    batches: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
    batch_size: int = 128,
) -> RelianceCurve:
    """Acurácia do classificador com dimensões latentes zeradas por fração.

    Raises:
        ValueError: frações fora de [0, 1], não começando em 0 ou não crescentes.
    """
    fractions = [float(f) for f in fractions]
    if not fractions or fractions[0] != 0.0 or any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("frações devem começar em 0 e ser estritamente crescentes")
    if fractions[-1] > 1.0:
        raise ValueError(f"fração {fractions[-1]} maior que 1")
    if batches is None:
        batches = latent_batches(net, dataset, batch_size)
    return RelianceCurve(direction, fractions, [head_accuracy(net, batches, f, direction) for f in fractions])


def reliance_curves(
    net: Network,
    dataset: Dataset,
    fractions: Sequence[float] = RELIANCE_FRACTIONS,
    batch_size: int = 128,
) -> tuple[RelianceCurve, RelianceCurve]:
    """As duas direções sobre os mesmos latentes."""
    batches = latent_batches(net, dataset, batch_size)
    return (
        feature_reliance(net, dataset, "drop_from_top", fractions, batches),
        feature_reliance(net, dataset, "drop_from_bottom", fractions, batches),
    )


def reliance_area(curve: RelianceCurve) -> float:
    """Área (trapézios) sob a curva de acurácia retida."""
    return float(trapezoid(curve.accuracies, curve.fractions))


# --- histograma ativação × gradiente ---------------------------------------------

def norm_edges(bins: int, low: float = -6.0, high: float = 3.0) -> np.ndarray:
    """Bordas log-espaçadas precedidas de 0; o primeiro bin [0, 10^low) é o bin do zero."""
    return np.concatenate([[0.0], np.logspace(low, high, bins)])


@dataclass
class NormHistogram2D:
    layer: int
    counts: np.ndarray  # [bins, bins]: eixo 0 ativação, eixo 1 gradiente
    edges: np.ndarray
    activation_norms: np.ndarray  # [batches, filtros]
    gradient_norms: np.ndarray  # [batches, filtros]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def filter_norms(net: Network, images: np.ndarray, labels: np.ndarray, layer: int) -> tuple[np.ndarray, np.ndarray]:
    """Norma da ativação (saída da conv do bloco, média no batch) e do gradiente do peso, por filtro."""
    reset_tape()
    net.zero_grad()
    capture: list[Tensor] = []
    h = Tensor(images)
    for index in range(net.num_blocks):
        h = net.run_block(h, index, capture if index == layer - 1 else None)
    logits = net.head(global_avg_pool(h))
    loss = softmax_cross_entropy(logits, one_hot(labels, net.spec.num_classes))
    backward(loss)
    reset_tape()

    activation = capture[0].data.astype(np.float64)
    act_norms = np.sqrt(np.sum(activation ** 2, axis=(2, 3))).mean(axis=0)
    weight = net.params[f"block{layer - 1}.conv.weight"]
    grad = weight.grad if weight.grad is not None else np.zeros_like(weight.data)
    grad_norms = np.sqrt(np.sum(grad.astype(np.float64) ** 2, axis=(1, 2, 3)))
    return act_norms, grad_norms


def activation_gradient_histogram(
    net: Network,
    dataset: Dataset,
    layer: int,
    bins: int = 20,
    batch_size: int = 64,
    max_batches: int = 4,
) -> NormHistogram2D:
    """Histograma 2D (log) das normas por filtro do bloco `layer` (1..n).

    Forward/backward em modo treino sobre uma réplica; a rede original não muda.

    Raises:
        LayerIndexError: layer fora de [1, n].
    """
    if not 1 <= layer <= net.num_blocks:
        raise LayerIndexError(f"camada {layer} fora de [1, {net.num_blocks}]", key="layer")
    replica = net.replica().train()
    acts, grads = [], []
    for b, (images, labels) in enumerate(iterate_batches(dataset, batch_size)):
        if b >= max_batches:
            break
        a, g = filter_norms(replica, images, labels, layer)
        acts.append(a)
        grads.append(g)
    activation_norms, gradient_norms = np.stack(acts), np.stack(grads)

    edges = norm_edges(bins)
    counts, _, _ = np.histogram2d(
        np.clip(activation_norms.ravel(), 0.0, edges[-1]),
        np.clip(gradient_norms.ravel(), 0.0, edges[-1]),
        bins=[edges, edges],
    )
    return NormHistogram2D(layer, counts.astype(np.int64), edges, activation_norms, gradient_norms)


# --- superfície de perda -----------------------------------------------------------

@dataclass
class LandscapeGrid:
    coords: np.ndarray  # [n] em [−span, span], com 0 exato no centro
    losses: np.ndarray  # [n, n]: losses[i, j] em (a=coords[i], b=coords[j])
    seeds: tuple[int, int]
    center_loss: float = field(default=0.0)


def filter_normalized_direction(net: Network, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Direção gaussiana com a norma de cada filtro igual à do filtro do modelo.

    Tensores de posto 1 (biases, parâmetros de normalização) recebem direção nula.
    """
    direction: dict[str, np.ndarray] = {}
    for name, p in net.named_parameters():
        d = rng.standard_normal(p.shape)
        if p.ndim >= 2:
            axes = tuple(range(1, p.ndim))
            weight_norm = np.sqrt(np.sum(p.data.astype(np.float64) ** 2, axis=axes, keepdims=True))
            d_norm = np.sqrt(np.sum(d ** 2, axis=axes, keepdims=True))
            d = d * weight_norm / (d_norm + 1e-10)
        else:
            d = np.zeros(p.shape)
        direction[name] = d.astype(p.dtype)
    return direction


def mean_loss(net: Network, images: np.ndarray, labels: np.ndarray, batch_size: int = 128) -> float:
    total = 0.0
    with no_grad():
        for start in range(0, len(images), batch_size):
            chunk = slice(start, start + batch_size)
            logits = net.forward(Tensor(images[chunk]))
            loss = softmax_cross_entropy(logits, one_hot(labels[chunk], net.spec.num_classes))
            total += loss.item() * len(labels[chunk])
    return total / len(images)


def loss_landscape(
    net: Network,
    dataset: Dataset,
    grid_n: int = 21,
    seed: int = 0,
    span: float = 1.0,
    max_samples: int = 256,
    batch_size: int = 128,
) -> LandscapeGrid:
    """Perda média em θ + a·d₁ + b·d₂ sobre uma grade grid_n × grid_n.

    Raises:
        ValueError: grid_n par (a grade precisa conter (0, 0)).
    """
    if grid_n < 1 or grid_n % 2 == 0:
        raise ValueError(f"grid_n deve ser ímpar, recebeu {grid_n}")
    net.eval()
    d1 = filter_normalized_direction(net, np.random.default_rng(seed))
    d2 = filter_normalized_direction(net, np.random.default_rng(seed + 1))
    coords = np.linspace(-span, span, grid_n)
    coords[grid_n // 2] = 0.0
    images, labels = dataset.images[:max_samples], dataset.labels[:max_samples]

    def point(ij: tuple[int, int]) -> float:
        a, b = coords[ij[0]], coords[ij[1]]
        if a == 0.0 and b == 0.0:
            return mean_loss(net, images, labels, batch_size)
        offsets = {name: (a * d1[name] + b * d2[name]).astype(d1[name].dtype) for name in d1}
        return mean_loss(net.replica(offsets).eval(), images, labels, batch_size)

    cells = [(i, j) for i in range(grid_n) for j in range(grid_n)]
    losses = np.array(parallel_map(point, cells)).reshape(grid_n, grid_n)
    center = mean_loss(net, images, labels, batch_size)
    return LandscapeGrid(coords, losses, (seed, seed + 1), center)
