"""
Primitivas diferenciáveis sobre `Tensor`.

Convenções:
  - broadcasting restrito a escalar-vs-tensor ou formas iguais;
  - conv2d usa correlação cruzada (sem inversão do kernel), como os frameworks usuais;
  - cada primitiva devolve gradientes apenas para operandos que os exigem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from src.errors import ConfigError, ShapeError
from src.tensor.core import Tensor, as_tensor, record

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("relu", "exp", "log")


def _reduce(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum(), dtype=grad.dtype).reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    raise ShapeError(
        f"formas incompatíveis para operação elemento a elemento: {a.shape} e {b.shape}"
    )


def elementwise(op_kind: str, a: Tensor | np.ndarray, b: Tensor | np.ndarray | float | None = None) -> Tensor:
    """Aplica uma operação elemento a elemento (add, sub, mul, div, relu, exp, log, scale)."""
    a = as_tensor(a)

    if op_kind in UNARY_OPS:
        if b is not None:
            raise ValueError(f"{op_kind} é unária")
        return _unary(op_kind, a)

    if op_kind == "scale":
        if b is None or isinstance(b, Tensor) or np.ndim(b) != 0:
            raise ValueError("scale exige um escalar")
        factor = float(b)
        return record(
            "scale", (a,), a.data * a.dtype.type(factor),
            lambda g: (g * a.dtype.type(factor),),
        )

    if op_kind not in BINARY_OPS:
        raise ValueError(f"operação desconhecida: {op_kind}")

    other = b if isinstance(b, Tensor) else Tensor(np.asarray(b), dtype=a.dtype)
    _check_broadcast(a, other)
    x, y = a.data, other.data

    if op_kind == "add":
        out = x + y

        def grad_fn(g):
            return (_reduce(g, x.shape), _reduce(g, y.shape))
    elif op_kind == "sub":
        out = x - y

        def grad_fn(g):
            return (_reduce(g, x.shape), _reduce(-g, y.shape))
    elif op_kind == "mul":
        out = x * y

        def grad_fn(g):
            return (
                _reduce(g * y, x.shape) if a.requires_grad else None,
                _reduce(g * x, y.shape) if other.requires_grad else None,
            )
    else:
        out = x / y

        def grad_fn(g):
            return (
                _reduce(g / y, x.shape) if a.requires_grad else None,
                _reduce(-g * x / (y * y), y.shape) if other.requires_grad else None,
            )

    return record(op_kind, (a, other), out, grad_fn)


def _unary(op_kind: str, a: Tensor) -> Tensor:
    x = a.data
    if op_kind == "relu":
        out = np.maximum(x, x.dtype.type(0))
        return record("relu", (a,), out, lambda g: (g * (x > 0),))
    if op_kind == "exp":
        out = np.exp(x)
        return record("exp", (a,), out, lambda g: (g * out,))
    out = np.log(x)
    return record("log", (a,), out, lambda g: (g / x,))


def relu(a: Tensor) -> Tensor:
    return elementwise("relu", a)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Produto matricial [M×K]·[K×N]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: dimensões internas incompatíveis {a.shape} x {b.shape}")
    x, y = a.data, b.data

    def grad_fn(g):
        return (
            g @ y.T if a.requires_grad else None,
            x.T @ g if b.requires_grad else None,
        )

    return record("matmul", (a, b), x @ y, grad_fn)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Camada totalmente conectada: x[B,D] · weight[N,D]ᵀ + bias[N]."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"linear: entrada {x.shape} incompatível com pesos {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ShapeError(f"linear: bias {bias.shape} para {weight.shape[0]} saídas")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is not None:
        out = out + bias.data

    def grad_fn(g):
        grads = [
            g @ wd if x.requires_grad else None,
            g.T @ xd if weight.requires_grad else None,
        ]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return record("linear", inputs, out, grad_fn)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = a.data.reshape(shape)
    return record("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def tensor_sum(a: Tensor) -> Tensor:
    out = np.asarray(a.data.sum(), dtype=a.dtype)
    return record("sum", (a,), out, lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a: Tensor) -> Tensor:
    n = a.size
    out = np.asarray(a.data.mean(), dtype=a.dtype)
    return record("mean", (a,), out, lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def conv2d(
    x: Tensor,
    kernel: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Correlação cruzada 2D: x[B,Cin,H,W] ⋆ kernel[Cout,Cin,kh,kw] -> [B,Cout,H',W'].

    Raises:
        ShapeError: canais de entrada divergentes ou kernel maior que a entrada.
        ConfigError: tamanho de saída (H+2p−kh)/stride+1 não inteiro.
    """
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(f"conv2d espera entrada 4D e kernel 4D, recebeu {x.shape} e {kernel.shape}")
    batch, c_in, height, width = x.shape
    c_out, k_in, kh, kw = kernel.shape
    if k_in != c_in:
        raise ShapeError(f"conv2d: entrada com {c_in} canais, kernel espera {k_in}")
    hp, wp = height + 2 * padding, width + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} maior que a entrada com padding {hp}x{wp}")
    if (hp - kh) % stride or (wp - kw) % stride:
        raise ConfigError(
            f"conv2d: saída não inteira para entrada {height}x{width}, kernel {kh}x{kw}, "
            f"stride {stride}, padding {padding}"
        )
    h_out = (hp - kh) // stride + 1
    w_out = (wp - kw) // stride + 1

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(batch * h_out * w_out, c_in * kh * kw)
    wmat = kernel.data.reshape(c_out, -1)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = np.ascontiguousarray(out.reshape(batch, h_out, w_out, c_out).transpose(0, 3, 1, 2))

    def grad_fn(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, c_out)
        grads = [None, (g2.T @ cols).reshape(kernel.shape) if kernel.requires_grad else None]
        if x.requires_grad:
            gcols = (g2 @ wmat).reshape(batch, h_out, w_out, c_in, kh, kw)
            gxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += (
                        gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            grads[0] = gxp[:, :, padding:padding + height, padding:padding + width] if padding else gxp
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    inputs = (x, kernel) if bias is None else (x, kernel, bias)
    return record("conv2d", inputs, out, grad_fn)


def pool2d(kind: str, x: Tensor, window: int, stride: int | None = None) -> Tensor:
    """Pooling 2D máximo ou médio com janela quadrada."""
    stride = stride or window
    if kind not in ("max", "avg"):
        raise ValueError(f"pooling desconhecido: {kind}")
    batch, channels, height, width = x.shape
    if window > height or window > width:
        raise ShapeError(f"pool2d: janela {window} maior que a entrada {height}x{width}")
    if (height - window) % stride or (width - window) % stride:
        raise ConfigError(f"pool2d: saída não inteira para {height}x{width}, janela {window}, stride {stride}")
    h_out = (height - window) // stride + 1
    w_out = (width - window) // stride + 1
    windows = sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]

    if kind == "max":
        flat = windows.reshape(batch, channels, h_out, w_out, window * window)
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
    else:
        out = windows.mean(axis=(-2, -1))

    def grad_fn(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        area = window * window
        for i in range(window):
            for j in range(window):
                if kind == "max":
                    contrib = g * (argmax == i * window + j)
                else:
                    contrib = g / area
                gx[:, :, i:i + stride * h_out:stride, j:j + stride * w_out:stride] += contrib
        return (gx,)

    return record(f"{kind}pool2d", (x,), np.ascontiguousarray(out), grad_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """Média espacial: [B,C,H,W] -> [B,C]."""
    area = x.shape[2] * x.shape[3]
    out = x.data.mean(axis=(2, 3))
    return record(
        "global_avg_pool", (x,), out,
        lambda g: (np.broadcast_to(g[:, :, None, None] / area, x.shape).copy(),),
    )


@dataclass
class RunningStats:
    """Médias móveis de uma camada de BatchNorm (atualizadas só em modo treino)."""
    mean: np.ndarray
    var: np.ndarray

    @classmethod
    def fresh(cls, channels: int, dtype: np.dtype) -> RunningStats:
        return cls(np.zeros(channels, dtype=dtype), np.ones(channels, dtype=dtype))

    def update(self, batch_mean: np.ndarray, batch_var: np.ndarray, momentum: float) -> None:
        self.mean = ((1.0 - momentum) * self.mean + momentum * batch_mean).astype(self.mean.dtype)
        self.var = ((1.0 - momentum) * self.var + momentum * batch_var).astype(self.var.dtype)

    def copy(self) -> RunningStats:
        return RunningStats(self.mean.copy(), self.var.copy())


def batchnorm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running: RunningStats,
    training: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """BatchNorm por canal; em treino usa estatísticas do batch e atualiza `running`.

    As estatísticas do batch são acumuladas em float64 e arredondadas para o dtype
    da entrada, então reordenar as amostras do batch não muda a saída em float32.
    """
    batch, channels, height, width = x.shape
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(f"batchnorm2d: parâmetros {gamma.shape}/{beta.shape} para {channels} canais")
    xd = x.data
    n = batch * height * width
    if training:
        mu64 = xd.mean(axis=(0, 2, 3), dtype=np.float64)
        var64 = np.square(xd - mu64[None, :, None, None]).mean(axis=(0, 2, 3))
        running.update(mu64, var64 * (n / max(n - 1, 1)), momentum)
        mu = mu64.astype(xd.dtype)
        var = var64.astype(xd.dtype)
    else:
        mu, var = running.mean, running.var
    inv = (1.0 / np.sqrt(var + eps)).astype(xd.dtype)
    xhat = (xd - mu[None, :, None, None]) * inv[None, :, None, None]
    out = gamma.data[None, :, None, None] * xhat + beta.data[None, :, None, None]

    def grad_fn(g):
        gxhat = g * gamma.data[None, :, None, None]
        if training:
            gx = (inv[None, :, None, None] / n) * (
                n * gxhat
                - gxhat.sum(axis=(0, 2, 3), keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
            )
        else:
            gx = gxhat * inv[None, :, None, None]
        return (gx, (g * xhat).sum(axis=(0, 2, 3)), g.sum(axis=(0, 2, 3)))

    return record("batchnorm2d", (x, gamma, beta), out.astype(xd.dtype), grad_fn)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax por linha (sem fita), estabilizada por subtração do máximo."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """Entropia cruzada com rótulos suaves: média de −Σ y·log softmax(logits).

    Raises:
        ShapeError: alvo com forma diferente dos logits.
        ValueError: linhas do alvo negativas ou que não somam 1 ± 1e-6.
    """
    t = target.data if isinstance(target, Tensor) else np.asarray(target)
    t = t.astype(logits.dtype, copy=False)
    if logits.ndim != 2 or t.shape != logits.shape:
        raise ShapeError(f"softmax_cross_entropy: logits {logits.shape} e alvo {t.shape}")
    row_sums = t.sum(axis=1, dtype=np.float64)
    if np.any(t < 0) or np.any(np.abs(row_sums - 1.0) > 1e-6):
        raise ValueError("linhas do alvo devem ser vetores de probabilidade (soma 1 ± 1e-6)")

    batch = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", over="ignore"):
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        per_row = -np.where(t > 0, t * logp, 0.0).sum(axis=1)
    loss = np.asarray(per_row.mean(), dtype=logits.dtype)

    def grad_fn(g):
        p = np.exp(logp)
        return ((p * t.sum(axis=1, keepdims=True) - t) * (g / batch),)

    return record("softmax_cross_entropy", (logits,), loss, grad_fn)


def index_select_batch(x: Tensor, perm: np.ndarray, allow_repeats: bool = False) -> Tensor:
    """Seleciona linhas do batch: out[i] = x[perm[i]].

    O backward soma os gradientes nas linhas de origem (uma linha referenciada
    duas vezes acumula as duas contribuições).

    Args:
        x: tensor [B, ...].
        perm: permutação de 0..B-1.
        allow_repeats: aceita qualquer vetor de índices válido em vez de exigir permutação.
    """
    idx = np.asarray(perm)
    batch = x.shape[0]
    if idx.ndim != 1 or idx.shape[0] != batch or idx.dtype.kind not in "iu":
        raise ValueError(f"índices {idx.tolist()} inválidos para batch de tamanho {batch}")
    if allow_repeats:
        if np.any(idx < 0) or np.any(idx >= batch):
            raise ValueError(f"índices {idx.tolist()} fora do intervalo [0, {batch})")
    elif not np.array_equal(np.sort(idx), np.arange(batch)):
        raise ValueError(f"{idx.tolist()} não é uma permutação de 0..{batch - 1}")

    def grad_fn(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, idx, g)
        return (gx,)

    return record("index_select_batch", (x,), x.data[idx], grad_fn)
