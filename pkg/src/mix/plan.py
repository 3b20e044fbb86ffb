"""
MixPlan (a decisão de mistura de uma iteração) e o log de auditoria em CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

AUDIT_HEADER = ["iteration", "k", "lambda", "n_mix", "mask_hex"]


@dataclass
class MixPlan:
    lam: float
    layer: int
    perm: np.ndarray
    strategy: str
    n_mix: int | None = None
    masks: np.ndarray | None = None  # [B, C] uint8, 1 = canal mantido da origem
    label_lam: float | None = None  # λ usado nos rótulos (CutMix ajusta pela área)

    @property
    def effective_label_lam(self) -> float:
        return self.lam if self.label_lam is None else self.label_lam

    def mask_hex(self) -> str:
        """Máscaras por amostra como bitstrings hexadecimais separadas por ';'."""
        if self.masks is None:
            return ""
        return ";".join(np.packbits(row.astype(np.uint8)).tobytes().hex() for row in self.masks)


class MixAuditLog:
    """CSV append-only com uma linha por iteração com mistura."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(AUDIT_HEADER)

    def append(self, iteration: int, plan: MixPlan) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow([
                iteration,
                plan.layer,
                repr(plan.lam),
                "" if plan.n_mix is None else plan.n_mix,
                plan.mask_hex(),
            ])
