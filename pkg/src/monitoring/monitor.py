"""
Monitor de treino: métricas por época em CSV, log de eventos JSONL e resumo da execução.

metrics.csv não contém tempo de parede, então duas execuções com a mesma
configuração e seed produzem o mesmo arquivo byte a byte; os tempos vão para
timing.jsonl, fora do contrato de reprodutibilidade dos CSVs.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable

from rich.console import Console
from rich.table import Table
from scipy.stats import chisquare

METRICS_HEADER = [
    "epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc", "layer_usage",
]


@dataclass
class EpochMetrics:
    """Linha de uma época em metrics.csv."""
    epoch: int
    lr: float
    train_loss: float
    train_accuracy: float
    val_loss: float | None = None
    val_accuracy: float | None = None
    layer_usage: dict[int, int] = field(default_factory=dict)


@dataclass
class EpochTiming:
    epoch: int
    wall_seconds: float
    iterations: int

    @property
    def mean_iteration_seconds(self) -> float:
        return self.wall_seconds / self.iterations if self.iterations else 0.0


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _usage_text(usage: dict[int, int]) -> str:
    return "|".join(f"{k}:{usage[k]}" for k in sorted(usage))


def _usage_parse(text: str) -> dict[int, int]:
    if not text:
        return {}
    pairs = (item.split(":") for item in text.split("|"))
    return {int(k): int(v) for k, v in pairs}


class MetricLog:
    """Log append-only com uma linha por época."""

    def __init__(self) -> None:
        self.rows: list[EpochMetrics] = []
        self.timings: list[EpochTiming] = []

    def __len__(self) -> int:
        return len(self.rows)

    def append(self, row: EpochMetrics, timing: EpochTiming | None = None) -> None:
        if self.rows and row.epoch <= self.rows[-1].epoch:
            raise ValueError(f"época {row.epoch} já registrada (última: {self.rows[-1].epoch})")
        self.rows.append(row)
        if timing is not None:
            self.timings.append(timing)

    def layer_usage(self) -> Counter:
        total: Counter = Counter()
        for row in self.rows:
            total.update(row.layer_usage)
        return total

    def best_val_accuracy(self) -> float | None:
        values = [r.val_accuracy for r in self.rows if r.val_accuracy is not None]
        return max(values) if values else None

    def mean_iteration_seconds(self) -> float:
        iterations = sum(t.iterations for t in self.timings)
        return sum(t.wall_seconds for t in self.timings) / iterations if iterations else 0.0

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for r in self.rows:
                writer.writerow([
                    r.epoch, _fmt(r.lr), _fmt(r.train_loss), _fmt(r.train_accuracy),
                    _fmt(r.val_loss), _fmt(r.val_accuracy), _usage_text(r.layer_usage),
                ])

    def write_timing_jsonl(self, path: str | Path) -> None:
        """Um objeto JSON por época com o tempo de parede e a média por iteração."""
        with open(path, "w", encoding="utf-8") as f:
            for t in self.timings:
                entry = {
                    "epoch": t.epoch,
                    "wall_seconds": t.wall_seconds,
                    "iterations": t.iterations,
                    "mean_iteration_seconds": t.mean_iteration_seconds,
                }
                f.write(json.dumps(entry) + "\n")

    @classmethod
    def read_csv(cls, path: str | Path) -> MetricLog:
        log = cls()
        with open(path, newline="", encoding="utf-8") as f:
            for record in csv.DictReader(f):
                log.append(EpochMetrics(
                    epoch=int(record["epoch"]),
                    lr=float(record["lr"]),
                    train_loss=float(record["train_loss"]),
                    train_accuracy=float(record["train_acc"]),
                    val_loss=float(record["val_loss"]) if record["val_loss"] else None,
                    val_accuracy=float(record["val_acc"]) if record["val_acc"] else None,
                    layer_usage=_usage_parse(record["layer_usage"]),
                ))
        return log


def log_event(path: str | Path, event: str, **payload: Any) -> None:
    """Acrescenta um evento ao log JSONL da execução."""
    entry = {"timestamp": datetime.now().isoformat(), "event": event, **payload}
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(entry, ensure_ascii=False, default=str) + "\n")


def load_events(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    if not path.exists():
        return []
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    continue
    return entries


def layer_usage_pvalue(usage: dict[int, int], layer_set: Iterable[int]) -> float:
    """p-valor do qui-quadrado contra uso uniforme do conjunto de camadas."""
    layers = sorted(set(layer_set))
    observed = [usage.get(k, 0) for k in layers]
    if len(layers) < 2 or sum(observed) == 0:
        return 1.0
    return float(chisquare(observed).pvalue)


def format_epoch_summary(row: EpochMetrics, timing: EpochTiming | None = None) -> str:
    """Linha legível de uma época."""
    text = (
        f"época {row.epoch:>3} | lr {row.lr:.4f} | "
        f"treino {row.train_loss:.4f} / {row.train_accuracy:.2f}%"
    )
    if row.val_accuracy is not None:
        text += f" | val {row.val_loss:.4f} / {row.val_accuracy:.2f}%"
    if timing is not None:
        text += f" | {timing.wall_seconds:.1f}s"
    return text


def print_run_report(log: MetricLog, layer_set: Iterable[int], console: Console | None = None) -> None:
    """Resumo agregado da execução."""
    console = console or Console()
    if not log.rows:
        console.print("[yellow]Nenhuma época registrada.[/yellow]")
        return

    layer_set = list(layer_set)
    usage = log.layer_usage()
    table = Table(title="Resumo do treino", show_header=False)
    table.add_column("Métrica", style="cyan")
    table.add_column("Valor")
    table.add_row("Épocas", str(len(log.rows)))
    best = log.best_val_accuracy()
    table.add_row("Melhor acurácia de validação", f"{best:.2f}%" if best is not None else "N/A")
    table.add_row("Acurácia final de treino", f"{log.rows[-1].train_accuracy:.2f}%")
    if log.timings:
        table.add_row("Tempo médio por iteração", f"{log.mean_iteration_seconds() * 1000:.1f} ms")
    if usage:
        table.add_row("Uso das camadas (k:n)", _usage_text(dict(usage)))
        table.add_row("p-valor de uniformidade", f"{layer_usage_pvalue(usage, layer_set):.4f}")
    console.print(table)
