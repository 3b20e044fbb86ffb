"""
Subcomandos da CLI.

Cada comando resolve configuração e artefatos de entrada antes de criar o
diretório de saída; a partir daí todo arquivo produzido é registrado no
manifest.json da execução.
"""

from __future__ import annotations

import argparse

import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from src.cli.rundir import RunDirectory
from src.config.loader import load_run_config, resolve_with_overrides
from src.data.dataset import Dataset
from src.data.storage import (
    dataset_split,
    datasets_from_config,
    disjoint_synthetic,
    load_dataset,
    save_dataset,
)
from src.errors import ArtifactIntegrityError, ConfigError, LayerIndexError
from src.eval import reports
from src.eval.analysis import activation_gradient_histogram, loss_landscape, reliance_area, reliance_curves
from src.eval.ood import msp_scores, ood_metrics
from src.eval.robustness import robustness_report
from src.models.schemas import RunConfig
from src.monitoring.monitor import EpochMetrics, EpochTiming, format_epoch_summary, print_run_report
from src.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint, spec_hash
from src.nn.presets import get_preset
from src.train.loop import run

console = Console()

SYNTHETIC_DISJOINT = "synthetic-disjoint"


# --- auxiliares -----------------------------------------------------------------

def _step(index: int, total: int, text: str) -> None:
    console.print(f"\n[bold][{index}/{total}][/bold] {text}")


def _open_checkpoint(args: argparse.Namespace) -> tuple[Checkpoint, RunConfig]:
    """Checkpoint + configuração de avaliação.

    Com --config, a spec da configuração precisa bater com a do checkpoint
    (senão ArtifactIntegrityError). Sem --config, vale o snapshot gravado no
    checkpoint com os overrides --set por cima.
    """
    expected = None
    config = None
    if args.config is not None:
        config = load_run_config(args.config, args.set)
        expected = spec_hash(get_preset(config.network.name, config.data.classes))
    try:
        checkpoint = load_checkpoint(args.checkpoint, expected)
    except FileNotFoundError as e:
        raise ConfigError(str(e), key="--checkpoint") from e

    if config is None:
        try:
            base = RunConfig.model_validate(checkpoint.meta.get("config", {}))
        except ValidationError as e:
            raise ArtifactIntegrityError(f"configuração gravada no checkpoint é inválida: {e}") from e
        config = resolve_with_overrides(base, args.set)
    return checkpoint, config


def _eval_dataset(args: argparse.Namespace, config: RunConfig, checkpoint: Checkpoint) -> Dataset:
    if args.data is not None:
        return load_dataset(args.data, checkpoint.spec.num_classes, split="test")
    return dataset_split(config.data, config.data_seed, "test")


def _ood_dataset(source: str, config: RunConfig) -> Dataset:
    if source == SYNTHETIC_DISJOINT:
        return disjoint_synthetic(config.data, config.data_seed)
    return load_dataset(source, split="ood")


def _describe(dataset: Dataset) -> str:
    c, h, w = dataset.image_shape
    return f"{len(dataset)} imagens {c}×{h}×{w}, {dataset.num_classes} classes ({dataset.provenance})"


# --- gen-data --------------------------------------------------------------------

def cmd_gen_data(args: argparse.Namespace) -> int:
    """Gera (ou converte) os splits train/val/test em um diretório novo."""
    config = load_run_config(args.config, args.set)
    fmt = args.format or config.data.format
    with RunDirectory(args.out, "gen-data", config.model_dump(mode="json"), config.data_seed) as rundir:
        _step(1, 2, "Gerando splits...")
        datasets = datasets_from_config(config.data, config.data_seed)
        for split, dataset in datasets.items():
            console.print(f"  {split}: {_describe(dataset)}")

        _step(2, 2, f"Gravando em {rundir.path} (formato {fmt})...")
        for split, dataset in datasets.items():
            for path in save_dataset(dataset, rundir.path / split, fmt):
                rundir.register(path)
        console.print(f"[green]✓ {len(rundir.manifest.artifacts)} arquivos gravados.[/green]")
    return 0


# --- train -------------------------------------------------------------------------

def cmd_train(args: argparse.Namespace) -> int:
    """Treina com a configuração resolvida e grava checkpoint, métricas e curvas."""
    config = load_run_config(args.config, args.set)
    with RunDirectory(args.out, "train", config.model_dump(mode="json"), config.train.seed) as rundir:
        _step(1, 4, "Carregando dados...")
        datasets = datasets_from_config(config.data, config.data_seed)
        for split, dataset in datasets.items():
            console.print(f"  {split}: {_describe(dataset)}")

        _step(2, 4, f"Treinando {config.network.name} por {config.train.epochs} épocas "
                    f"(mistura: {config.mix.strategy}, α={config.mix.alpha:g}, K={config.mix.layer_set})...")
        rundir.file("events.jsonl")
        if config.mix.audit:
            rundir.file("mix_audit.csv")

        def on_epoch(row: EpochMetrics, timing: EpochTiming) -> None:
            console.print(f"  {format_epoch_summary(row, timing)}")

        checkpoint, log = run(config, datasets, run_dir=rundir.path, on_epoch=on_epoch)

        _step(3, 4, "Gravando artefatos...")
        save_checkpoint(rundir.file("checkpoint.ckpt"), checkpoint)
        log.write_csv(rundir.file("metrics.csv"))
        log.write_timing_jsonl(rundir.file("timing.jsonl"))
        reports.plot_loss_curve_svg(log, rundir.file("loss_curve.svg"))
        console.print(
            f"[green]✓ Checkpoint da época {checkpoint.meta['epoch']} "
            f"(val {checkpoint.meta['val_accuracy']:.2f}%) em {rundir.path / 'checkpoint.ckpt'}[/green]"
        )

        _step(4, 4, "Resumo")
        print_run_report(log, config.mix.layer_set, console)
    return 0


# --- eval ---------------------------------------------------------------------------

def cmd_eval(args: argparse.Namespace) -> int:
    """Acurácia limpa, FGSM, deformações e corrupções de um checkpoint."""
    checkpoint, config = _open_checkpoint(args)
    dataset = _eval_dataset(args, config, checkpoint)
    with RunDirectory(args.out, "eval", config.model_dump(mode="json"), config.eval.seed) as rundir:
        net = checkpoint.network()
        _step(1, 2, f"Avaliando em {_describe(dataset)}...")
        report = robustness_report(
            net,
            dataset,
            seed=config.eval.seed,
            fgsm_epsilon=args.fgsm,
            deform=args.deform,
            corrupt=args.corrupt,
            batch_size=config.eval.batch_size,
        )

        _step(2, 2, "Gravando relatórios...")
        reports.write_robustness_csv(report, rundir.file("robustness.csv"))
        if args.deform:
            reports.write_deformation_csv(report.deformation, rundir.file("deformation.csv"))

        table = Table(title="Robustez", show_header=False)
        table.add_column("Métrica", style="cyan")
        table.add_column("Valor")
        table.add_row("Acurácia limpa", f"{report.clean_accuracy:.2f}%")
        if report.fgsm_accuracy is not None:
            table.add_row(f"FGSM (ε={report.fgsm_epsilon:.4f})", f"{report.fgsm_accuracy:.2f}%")
        for label, acc in report.deformation.items():
            table.add_row(label, f"{acc:.2f}%")
        if report.mean_corruption_error is not None:
            table.add_row("mCE", f"{report.mean_corruption_error:.2f}%")
        console.print(table)
    return 0


# --- analyze / ood -------------------------------------------------------------------

def _write_ood(rundir: RunDirectory, net, dataset: Dataset, source: str, config: RunConfig) -> None:
    outside = _ood_dataset(source, config)
    console.print(f"  fora da distribuição: {_describe(outside)}")
    scores_in = msp_scores(net, dataset, config.eval.batch_size)
    scores_out = msp_scores(net, outside, config.eval.batch_size)
    report = ood_metrics(scores_in, scores_out)
    reports.write_ood_csv(report, rundir.file("ood.csv"))
    reports.plot_ood_scores_svg(scores_in, scores_out, rundir.file("ood.svg"))
    console.print(
        f"[green]✓ FPR95 {report.fpr95:.4f} | AUROC {report.auroc:.4f} | AUPR {report.aupr:.4f}[/green]"
    )


def cmd_analyze(args: argparse.Namespace) -> int:
    """Curvas de dependência, histograma de normas ou métricas OOD."""
    checkpoint, config = _open_checkpoint(args)
    if args.hist is not None and not 1 <= args.hist <= checkpoint.spec.num_blocks:
        raise LayerIndexError(
            f"--hist {args.hist} fora de [1, {checkpoint.spec.num_blocks}] para {checkpoint.spec.name}",
            key="--hist",
        )
    dataset = _eval_dataset(args, config, checkpoint)
    with RunDirectory(args.out, "analyze", config.model_dump(mode="json"), config.eval.seed) as rundir:
        net = checkpoint.network()
        _step(1, 2, f"Analisando sobre {_describe(dataset)}...")

        if args.reliance:
            curves = reliance_curves(net, dataset, batch_size=config.eval.batch_size)
            _step(2, 2, "Gravando curvas de dependência...")
            reports.write_reliance_csv(curves, rundir.file("reliance.csv"))
            reports.plot_reliance_svg(curves, rundir.file("reliance.svg"))
            for curve in curves:
                console.print(f"  {curve.direction}: área {reliance_area(curve):.2f}")
        elif args.hist is not None:
            hist = activation_gradient_histogram(net, dataset, args.hist, batch_size=config.eval.batch_size)
            _step(2, 2, "Gravando histograma...")
            reports.write_histogram_csv(hist, rundir.file(f"hist_k{args.hist}.csv"))
            reports.plot_histogram_svg(hist, rundir.file(f"hist_k{args.hist}.svg"))
            console.print(f"  {hist.total} pares (filtro, batch) no histograma")
        else:
            _step(2, 2, "Medindo detecção fora de distribuição...")
            _write_ood(rundir, net, dataset, args.ood, config)
    return 0


def cmd_ood(args: argparse.Namespace) -> int:
    """FPR95, AUROC e AUPR com a probabilidade máxima do softmax."""
    checkpoint, config = _open_checkpoint(args)
    dataset = _eval_dataset(args, config, checkpoint)
    with RunDirectory(args.out, "ood", config.model_dump(mode="json"), config.eval.seed) as rundir:
        net = checkpoint.network()
        _step(1, 1, f"Dentro da distribuição: {_describe(dataset)}")
        _write_ood(rundir, net, dataset, args.ood_data, config)
    return 0


# --- landscape ----------------------------------------------------------------------

def cmd_landscape(args: argparse.Namespace) -> int:
    """Superfície de perda em torno dos pesos treinados."""
    checkpoint, config = _open_checkpoint(args)
    if args.grid_n < 1 or args.grid_n % 2 == 0:
        raise ConfigError(f"--grid-n deve ser ímpar, recebeu {args.grid_n}", key="--grid-n")
    dataset = _eval_dataset(args, config, checkpoint)
    with RunDirectory(args.out, "landscape", config.model_dump(mode="json"), args.seed) as rundir:
        net = checkpoint.network()
        _step(1, 2, f"Avaliando grade {args.grid_n}×{args.grid_n} (span {args.span:g})...")
        grid = loss_landscape(
            net,
            dataset,
            grid_n=args.grid_n,
            seed=args.seed,
            span=args.span,
            max_samples=args.max_samples,
            batch_size=config.eval.batch_size,
        )

        _step(2, 2, "Gravando superfície...")
        reports.write_landscape_csv(grid, rundir.file("landscape.csv"))
        reports.plot_landscape_svg(grid, rundir.file("landscape.svg"))
        console.print(
            f"[green]✓ perda no centro {grid.center_loss:.4f} | "
            f"mín {float(np.min(grid.losses)):.4f} | máx {float(np.max(grid.losses)):.4f}[/green]"
        )
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "analyze": cmd_analyze,
    "landscape": cmd_landscape,
    "ood": cmd_ood,
}