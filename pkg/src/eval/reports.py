"""
Relatórios em CSV (cabeçalhos fixos) e renderizações SVG.

Os SVG omitem a data e usam um salt de hash fixo, então o mesmo relatório
gera o mesmo arquivo.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from src.eval.analysis import LandscapeGrid, NormHistogram2D, RelianceCurve  # noqa: E402
from src.models.schemas import OODReport, RobustnessReport  # noqa: E402
from src.monitoring.monitor import MetricLog  # noqa: E402

plt.rcParams["svg.hashsalt"] = "catchup-mix"


def _writer(path: Path):
    f = open(path, "w", newline="", encoding="utf-8")
    return f, csv.writer(f, lineterminator="\n")


def _num(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- CSV ------------------------------------------------------------------------

def write_robustness_csv(report: RobustnessReport, path: str | Path) -> None:
    """Formato longo: metric,setting,value."""
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(["metric", "setting", "value"])
        writer.writerow(["clean_accuracy", "", _num(report.clean_accuracy)])
        if report.fgsm_accuracy is not None:
            writer.writerow(["fgsm_accuracy", _num(report.fgsm_epsilon), _num(report.fgsm_accuracy)])
        for label, acc in report.deformation.items():
            writer.writerow(["deformation_accuracy", label, _num(acc)])
        for kind, errors in report.corruption_errors.items():
            for severity, err in enumerate(errors, start=1):
                writer.writerow(["corruption_error", f"{kind}_s{severity}", _num(err)])
        if report.mean_corruption_error is not None:
            writer.writerow(["mean_corruption_error", "", _num(report.mean_corruption_error)])


def write_deformation_csv(deformation: dict[str, float], path: str | Path) -> None:
    """Uma linha com uma coluna por deformação da grade."""
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(list(deformation))
        writer.writerow([_num(v) for v in deformation.values()])


def write_reliance_csv(curves: Sequence[RelianceCurve], path: str | Path) -> None:
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(["fraction", *(c.direction for c in curves)])
        for i, fraction in enumerate(curves[0].fractions):
            writer.writerow([_num(fraction), *(_num(c.accuracies[i]) for c in curves)])


def write_histogram_csv(hist: NormHistogram2D, path: str | Path) -> None:
    edges = hist.edges
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(["layer", "act_low", "act_high", "grad_low", "grad_high", "count"])
        for i in range(hist.counts.shape[0]):
            for j in range(hist.counts.shape[1]):
                writer.writerow([
                    hist.layer, _num(edges[i]), _num(edges[i + 1]),
                    _num(edges[j]), _num(edges[j + 1]), int(hist.counts[i, j]),
                ])


def write_landscape_csv(grid: LandscapeGrid, path: str | Path) -> None:
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(["a", "b", "loss"])
        for i, a in enumerate(grid.coords):
            for j, b in enumerate(grid.coords):
                writer.writerow([_num(a), _num(b), _num(grid.losses[i, j])])


def write_ood_csv(report: OODReport, path: str | Path) -> None:
    f, writer = _writer(Path(path))
    with f:
        writer.writerow(["metric", "value"])
        writer.writerow(["fpr95", _num(report.fpr95)])
        writer.writerow(["auroc", _num(report.auroc)])
        writer.writerow(["aupr", _num(report.aupr)])
        writer.writerow(["n_in", report.n_in])
        writer.writerow(["n_out", report.n_out])


# --- SVG ------------------------------------------------------------------------

def plot_reliance_svg(curves: Sequence[RelianceCurve], path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for curve in curves:
        ax.plot(curve.fractions, curve.accuracies, marker="o", markersize=3, label=curve.direction)
    ax.set_xlabel("fração do vetor latente zerada")
    ax.set_ylabel("acurácia (%)")
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, Path(path))


def plot_histogram_svg(hist: NormHistogram2D, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    edges = hist.edges.copy()
    edges[0] = edges[1] / 10.0  # bin do zero visível em escala log
    mesh = ax.pcolormesh(edges, edges, hist.counts.T, cmap="viridis")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("norma da ativação")
    ax.set_ylabel("norma do gradiente")
    ax.set_title(f"bloco {hist.layer}")
    fig.colorbar(mesh, ax=ax, label="filtros")
    fig.tight_layout()
    _save_svg(fig, Path(path))


def plot_landscape_svg(grid: LandscapeGrid, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    contour = ax.contour(grid.coords, grid.coords, grid.losses.T, levels=20)
    ax.clabel(contour, inline=True, fontsize=6)
    ax.plot([0.0], [0.0], "k+")
    ax.set_xlabel("direção 1")
    ax.set_ylabel("direção 2")
    fig.tight_layout()
    _save_svg(fig, Path(path))


def plot_loss_curve_svg(log: MetricLog, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    epochs = [r.epoch for r in log.rows]
    ax.plot(epochs, [r.train_loss for r in log.rows], label="treino")
    val = [(r.epoch, r.val_loss) for r in log.rows if r.val_loss is not None]
    if val:
        ax.plot(*zip(*val), marker="o", markersize=3, label="validação")
    ax.set_xlabel("época")
    ax.set_ylabel("perda")
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, Path(path))


def plot_ood_scores_svg(scores_in, scores_out, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    bins = [i / 40 for i in range(41)]
    ax.hist(scores_in, bins=bins, alpha=0.6, label="dentro da distribuição")
    ax.hist(scores_out, bins=bins, alpha=0.6, label="fora da distribuição")
    ax.set_xlabel("probabilidade máxima do softmax")
    ax.set_ylabel("amostras")
    ax.legend()
    fig.tight_layout()
    _save_svg(fig, Path(path))
