"""
Rede convolucional em blocos com a decomposição f(x) = q_k(p_k(x)).

A fronteira k=0 é a própria entrada; a fronteira k (1 ≤ k ≤ n) é a saída do
bloco k. `forward` é exatamente `forward_from(x, 0)`, então qualquer divisão
forward_to/forward_from percorre as mesmas primitivas na mesma ordem.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from src.errors import ConfigError, LayerIndexError, ShapeError
from src.models.schemas import NetworkSpec
from src.tensor.core import Tensor, default_dtype
from src.tensor.ops import (
    RunningStats,
    batchnorm2d,
    conv2d,
    global_avg_pool,
    linear,
    pool2d,
    relu,
)


def validate_spec(spec: NetworkSpec) -> None:
    """Confere a cadeia de canais e o número mínimo de blocos."""
    if spec.num_blocks < 2:
        raise ConfigError(
            f"a rede precisa de ao menos 2 blocos para ter um ponto de mistura interno, tem {spec.num_blocks}",
            key="network.blocks",
        )
    expected = spec.in_channels
    for index, block in enumerate(spec.blocks):
        if block.in_channels != expected:
            raise ConfigError(
                f"bloco {index} espera {block.in_channels} canais mas recebe {expected}",
                key=f"network.blocks[{index}].in_channels",
            )
        expected = block.out_channels


def _needs_projection(spec: NetworkSpec, index: int) -> bool:
    block = spec.blocks[index]
    return block.residual and (block.in_channels != block.out_channels or block.stride != 1)


def parameter_layout(spec: NetworkSpec) -> list[tuple[str, tuple[int, ...], str]]:
    """(nome, forma, inicialização) de cada parâmetro, na ordem de sorteio."""
    layout: list[tuple[str, tuple[int, ...], str]] = []
    for index, block in enumerate(spec.blocks):
        prefix = f"block{index}"
        layout.append((f"{prefix}.conv.weight", (block.out_channels, block.in_channels, block.kernel, block.kernel), "kaiming"))
        if block.bias:
            layout.append((f"{prefix}.conv.bias", (block.out_channels,), "zeros"))
        if block.norm == "batch":
            layout.append((f"{prefix}.norm.gamma", (block.out_channels,), "ones"))
            layout.append((f"{prefix}.norm.beta", (block.out_channels,), "zeros"))
        if _needs_projection(spec, index):
            layout.append((f"{prefix}.proj.weight", (block.out_channels, block.in_channels, 1, 1), "kaiming"))
    layout.append(("head.weight", (spec.num_classes, spec.latent_dim), "kaiming"))
    layout.append(("head.bias", (spec.num_classes,), "zeros"))
    return layout


def stats_layout(spec: NetworkSpec) -> list[tuple[str, int]]:
    return [
        (f"block{index}.norm", block.out_channels)
        for index, block in enumerate(spec.blocks)
        if block.norm == "batch"
    ]


class Network:
    """Parâmetros materializados de uma NetworkSpec."""

    def __init__(
        self,
        spec: NetworkSpec,
        params: dict[str, Tensor],
        stats: dict[str, RunningStats],
    ):
        self.spec = spec
        self.params = params
        self.stats = stats
        self.training = True

    # --- modo e parâmetros -------------------------------------------------

    def train(self) -> Network:
        self.training = True
        return self

    def eval(self) -> Network:
        self.training = False
        return self

    @property
    def num_blocks(self) -> int:
        return self.spec.num_blocks

    @property
    def boundaries(self) -> list[int]:
        return list(range(self.num_blocks + 1))

    @property
    def dtype(self) -> np.dtype:
        return self.params["head.weight"].dtype

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        yield from self.params.items()

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Parâmetros e estatísticas de BN como arrays nomeados."""
        arrays = {name: p.data for name, p in self.params.items()}
        for name, running in self.stats.items():
            arrays[f"{name}.running_mean"] = running.mean
            arrays[f"{name}.running_var"] = running.var
        return arrays

    @classmethod
    def from_arrays(cls, spec: NetworkSpec, arrays: dict[str, np.ndarray]) -> Network:
        """Reconstrói uma rede a partir de `state_arrays`.

        Raises:
            KeyError: tensor ausente.
            ShapeError: tensor com forma diferente da esperada pela spec.
        """
        validate_spec(spec)
        params: dict[str, Tensor] = {}
        for name, shape, _ in parameter_layout(spec):
            value = arrays[name]
            if tuple(value.shape) != shape:
                raise ShapeError(f"{name}: forma {tuple(value.shape)}, esperado {shape}")
            params[name] = Tensor(value, requires_grad=True)
        stats: dict[str, RunningStats] = {}
        for name, channels in stats_layout(spec):
            mean, var = arrays[f"{name}.running_mean"], arrays[f"{name}.running_var"]
            if mean.shape != (channels,) or var.shape != (channels,):
                raise ShapeError(f"{name}: estatísticas com forma {mean.shape}/{var.shape}, esperado ({channels},)")
            stats[name] = RunningStats(mean.copy(), var.copy())
        return cls(spec, params, stats)

    def replica(self, offsets: dict[str, np.ndarray] | None = None) -> Network:
        """Cópia independente (novas folhas, estatísticas copiadas), opcionalmente deslocada."""
        offsets = offsets or {}
        params = {
            name: Tensor(p.data + offsets[name] if name in offsets else p.data, requires_grad=True)
            for name, p in self.params.items()
        }
        stats = {name: running.copy() for name, running in self.stats.items()}
        clone = Network(self.spec, params, stats)
        clone.training = self.training
        return clone

    # --- forward -----------------------------------------------------------

    def _check_boundary(self, k: int) -> None:
        if not 0 <= k <= self.num_blocks:
            raise LayerIndexError(
                f"fronteira k={k} fora do intervalo [0, {self.num_blocks}]",
                key="layer",
            )

    def run_block(self, h: Tensor, index: int, capture: list[Tensor] | None = None) -> Tensor:
        """Aplica o bloco `index`; `capture` recebe a saída da convolução (antes da BN)."""
        block = self.spec.blocks[index]
        prefix = f"block{index}"
        z = conv2d(
            h,
            self.params[f"{prefix}.conv.weight"],
            self.params.get(f"{prefix}.conv.bias"),
            stride=block.stride,
            padding=block.padding,
        )
        if capture is not None:
            capture.append(z)
        if block.norm == "batch":
            z = batchnorm2d(
                z,
                self.params[f"{prefix}.norm.gamma"],
                self.params[f"{prefix}.norm.beta"],
                self.stats[f"{prefix}.norm"],
                training=self.training,
            )
        if block.residual:
            if _needs_projection(self.spec, index):
                shortcut = conv2d(h, self.params[f"{prefix}.proj.weight"], stride=block.stride)
            else:
                shortcut = h
            z = z + shortcut
        if block.activation == "relu":
            z = relu(z)
        if block.pool is not None:
            z = pool2d(block.pool, z, block.pool_window)
        return z

    def forward_to(self, x: Tensor, k: int) -> Tensor:
        """p_k: entrada -> mapa de ativação da fronteira k (k=0 devolve x)."""
        self._check_boundary(k)
        h = x
        for index in range(k):
            h = self.run_block(h, index)
        return h

    def forward_from(self, h: Tensor, k: int) -> Tensor:
        """q_k: mapa da fronteira k -> logits [B, N]."""
        self._check_boundary(k)
        channels = self.spec.boundary_channels(k)
        if h.ndim != 4 or h.shape[1] != channels:
            raise ShapeError(f"fronteira {k} espera [B,{channels},H,W], recebeu {h.shape}")
        for index in range(k, self.num_blocks):
            h = self.run_block(h, index)
        return self.head(global_avg_pool(h))

    def forward(self, x: Tensor) -> Tensor:
        return self.forward_from(x, 0)

    __call__ = forward

    def latent(self, x: Tensor) -> Tensor:
        """Vetor latente [B, D] (média espacial da última fronteira)."""
        return global_avg_pool(self.forward_to(x, self.num_blocks))

    def head(self, latent: Tensor) -> Tensor:
        return linear(latent, self.params["head.weight"], self.params["head.bias"])


def build(spec: NetworkSpec, init_seed: int, dtype: type | np.dtype | None = None) -> Network:
    """Materializa a rede com inicialização Kaiming (fan-in) determinística.

    Raises:
        ConfigError: menos de 2 blocos ou cadeia de canais inconsistente.
    """
    validate_spec(spec)
    dtype = np.dtype(dtype) if dtype is not None else default_dtype()
    rng = np.random.default_rng(init_seed)
    params: dict[str, Tensor] = {}
    for name, shape, init in parameter_layout(spec):
        if init == "kaiming":
            fan_in = int(np.prod(shape[1:]))
            value = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        elif init == "ones":
            value = np.ones(shape)
        else:
            value = np.zeros(shape)
        params[name] = Tensor(value.astype(dtype), requires_grad=True)
    stats = {name: RunningStats.fresh(channels, dtype) for name, channels in stats_layout(spec)}
    return Network(spec, params, stats)
