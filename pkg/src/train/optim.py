"""SGD com momentum e weight decay, e os agendamentos de taxa de aprendizado."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from src.models.schemas import OptimConfig
from src.tensor.core import Tensor


class SGD:
    """v ← μ·v + g;  θ ← (1 − lr·wd)·θ − lr·v  (v começa igual ao primeiro gradiente).

    O decaimento fica fora do buffer de momentum: com gradiente zero cada passo
    encolhe θ por exatamente (1 − lr·wd).
    """

    def __init__(
        self,
        params: list[Tensor],
        lr: float,
        momentum: float = 0.9,
        weight_decay: float = 5e-4,
    ):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.buffers: list[np.ndarray | None] = [None] * len(self.params)

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        for i, p in enumerate(self.params):
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            direction = grad
            if self.momentum:
                buffer = self.buffers[i]
                direction = grad.copy() if buffer is None else self.momentum * buffer + grad
                self.buffers[i] = direction
            data = p.data * (1.0 - lr * self.weight_decay) if self.weight_decay else p.data
            p.assign(data - lr * direction)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


@dataclass(frozen=True)
class Schedule:
    kind: str
    lr0: float
    total_epochs: int
    milestones: tuple[int, ...] = field(default_factory=tuple)
    gamma: float = 0.1

    @classmethod
    def from_config(cls, optim: OptimConfig, epochs: int) -> Schedule:
        return cls(optim.schedule, optim.lr, epochs, tuple(sorted(optim.milestones)), optim.gamma)


def lr_at(schedule: Schedule, epoch: int) -> float:
    """Taxa de aprendizado da época (0-indexada).

    step: lr₀·γ^(marcos ≤ época);  cosine: lr₀·½(1 + cos(π·época/(total − 1))),
    que vai de lr₀ na primeira época a 0 na última. Com uma única época, lr₀.
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise ValueError(f"época {epoch} fora de [0, {schedule.total_epochs})")
    if schedule.kind == "step":
        passed = sum(1 for m in schedule.milestones if epoch >= m)
        return schedule.lr0 * schedule.gamma ** passed
    if schedule.total_epochs == 1:
        return schedule.lr0
    return schedule.lr0 * 0.5 * (1.0 + math.cos(math.pi * epoch / (schedule.total_epochs - 1)))
