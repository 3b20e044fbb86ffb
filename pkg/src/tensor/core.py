"""
Tensor denso com diferenciação automática em modo reverso.

Cada thread tem sua própria fita (Tape). Toda primitiva cujo algum operando
exige gradiente registra um nó na fita ativa; o backward percorre os nós em
ordem inversa de registro, que é uma ordem topológica reversa válida.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from src.errors import GradientError

_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def default_dtype() -> np.dtype:
    """Precisão padrão da thread atual (float32, salvo dentro de `precision`)."""
    return getattr(_local, "dtype", np.dtype(np.float32))


@contextmanager
def precision(dtype: type | np.dtype) -> Iterator[None]:
    """Troca a precisão padrão da thread (ex.: float64 para gradcheck)."""
    previous = default_dtype()
    _local.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _local.dtype = previous


def grad_enabled() -> bool:
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Desliga o registro na fita da thread atual."""
    previous = grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


class Tensor:
    """Array numérico imutável que pode participar da fita de gradientes."""

    __slots__ = ("data", "requires_grad", "grad", "node_id", "_tape", "__weakref__")

    def __init__(
        self,
        data: object,
        requires_grad: bool = False,
        dtype: type | np.dtype | None = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        if dtype is None:
            if isinstance(data, np.ndarray) and data.dtype.kind == "f":
                dtype = data.dtype
            else:
                dtype = default_dtype()
        array = np.asarray(data, dtype=dtype).view()
        array.flags.writeable = False
        self.data: np.ndarray = array
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node_id: int | None = None
        self._tape: Tape | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.node_id is None

    def item(self) -> float:
        if self.size != 1:
            raise ValueError(f"item() exige um único elemento, forma {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def assign(self, value: np.ndarray) -> None:
        """Ponto de atualização de parâmetros: substitui os valores mantendo forma e dtype."""
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise GradientError(f"assign com forma {value.shape} em tensor {self.data.shape}")
        array = value.copy()
        array.flags.writeable = False
        self.data = array

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> Tensor:
        return Tensor(self.data, requires_grad=False)

    def backward(self) -> dict[Tensor, np.ndarray]:
        return backward(self)

    # operadores delegam para as primitivas de src.tensor.ops
    def __add__(self, other: Tensor | float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("add", self, other)

    def __radd__(self, other: float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("add", self, other)

    def __sub__(self, other: Tensor | float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("sub", self, other)

    def __rsub__(self, other: float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("add", elementwise("scale", self, -1.0), other)

    def __mul__(self, other: Tensor | float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("mul", self, other)

    def __rmul__(self, other: float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("mul", self, other)

    def __truediv__(self, other: Tensor | float) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("div", self, other)

    def __neg__(self) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("scale", self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        from src.tensor.ops import matmul
        return matmul(self, other)

    def relu(self) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("relu", self)

    def exp(self) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("exp", self)

    def log(self) -> Tensor:
        from src.tensor.ops import elementwise
        return elementwise("log", self)

    def sum(self) -> Tensor:
        from src.tensor.ops import tensor_sum
        return tensor_sum(self)

    def reshape(self, *shape: int) -> Tensor:
        from src.tensor.ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


@dataclass
class Node:
    """Registro de uma primitiva: entradas, saída e a regra de backward."""
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Registro ordenado das primitivas executadas em uma thread."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.consumed = False

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        output.node_id = len(self.nodes)
        output._tape = self
        self.nodes.append(Node(op, tuple(inputs), output, backward_fn))

    def backward(
        self,
        loss: Tensor,
        wrt: Iterable[Tensor] | None = None,
    ) -> dict[Tensor, np.ndarray]:
        """Propaga dLoss/dFolha para todas as folhas (ou só as de `wrt`).

        Returns:
            Mapa folha -> gradiente acumulado (o mesmo array guardado em `.grad`).
        """
        if loss.size != 1:
            raise GradientError(f"backward exige perda escalar, recebeu forma {loss.shape}")
        if loss.node_id is None or loss._tape is not self:
            raise GradientError("perda desanexada: não foi produzida na fita ativa")
        if self.consumed:
            raise GradientError("backward repetido na mesma fita; chame reset_tape() antes")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for node in reversed(self.nodes[: loss.node_id + 1]):
            upstream = grads.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, grad in zip(node.inputs, node.backward(upstream)):
                if grad is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                # acumulação aditiva no fan-out
                grads[key] = grads[key] + grad if key in grads else grad
                if tensor.node_id is None:
                    leaves[key] = tensor
        self.consumed = True

        wanted = None if wrt is None else {id(t) for t in wrt}
        result: dict[Tensor, np.ndarray] = {}
        for key, leaf in leaves.items():
            if wanted is not None and key not in wanted:
                continue
            grad = np.asarray(grads[key], dtype=leaf.dtype).reshape(leaf.shape)
            leaf.grad = grad if leaf.grad is None else leaf.grad + grad
            result[leaf] = leaf.grad
        return result


def current_tape() -> Tape:
    tape = getattr(_local, "tape", None)
    if tape is None:
        tape = Tape()
        _local.tape = tape
    return tape


def reset_tape() -> Tape:
    """Descarta a fita da thread e inicia uma nova."""
    _local.tape = Tape()
    return _local.tape


def backward(loss: Tensor, wrt: Iterable[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    tape = loss._tape if loss._tape is not None else current_tape()
    if tape is not current_tape():
        raise GradientError("perda pertence a uma fita que não é a ativa desta thread")
    return tape.backward(loss, wrt)


def record(
    op: str,
    inputs: Sequence[Tensor],
    output_data: np.ndarray,
    backward_fn: BackwardFn,
) -> Tensor:
    """Cria o tensor de saída e o registra na fita se algum operando exigir gradiente."""
    needs_grad = grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(output_data, requires_grad=needs_grad, dtype=output_data.dtype)
    if needs_grad:
        current_tape().record(op, inputs, out, backward_fn)
    return out


def as_tensor(value: Tensor | np.ndarray | float, dtype: np.dtype | None = None) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value, dtype=dtype)
