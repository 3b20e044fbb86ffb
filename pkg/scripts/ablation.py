"""
Comparação multi-seed: baseline, mistura de features por camada e variantes.

Uso:
  python -m scripts.ablation --out runs/ablation
  python -m scripts.ablation --seeds 0,1,2 --epochs 60 --alphas 0.1,1,2,5,10
  python -m scripts.ablation --layer-sets --config configs/catchup.cfg
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

from rich.console import Console  # noqa: E402
from rich.table import Table  # noqa: E402

from src.config.loader import load_run_config, resolve_with_overrides  # noqa: E402
from src.data.storage import datasets_from_config  # noqa: E402
from src.errors import CumError, exit_code_for  # noqa: E402
from src.eval.analysis import reliance_area, reliance_curves  # noqa: E402
from src.eval.robustness import eval_accuracy  # noqa: E402
from src.models.schemas import RunConfig  # noqa: E402
from src.train.loop import run  # noqa: E402

console = Console()

BASE_VARIANTS: dict[str, list[str]] = {
    "baseline": ["mix.strategy=none"],
    "catchup": ["mix.strategy=catchup"],
    "random_channel": ["mix.strategy=random_channel"],
    "cutmix": ["mix.strategy=catchup", "mix.layer_set=0", "mix.input_mix_kind=cutmix"],
    "input_mixup": ["mix.strategy=catchup", "mix.layer_set=0", "mix.input_mix_kind=input_mixup"],
}
HEADER = ["variant", "seed", "test_acc", "reliance_area_top", "reliance_area_bottom", "mean_iteration_ms"]


@dataclass
class Result:
    variant: str
    seed: int
    test_accuracy: float
    area_top: float
    area_bottom: float
    iteration_ms: float


def build_variants(base: RunConfig, alphas: list[float], layer_sets: bool) -> dict[str, list[str]]:
    variants = dict(BASE_VARIANTS)
    for alpha in alphas:
        variants[f"catchup_alpha{alpha:g}"] = ["mix.strategy=catchup", f"mix.alpha={alpha}"]
    if layer_sets:
        full = list(base.mix.layer_set)
        for left_out in full:
            subset = ",".join(str(k) for k in full if k != left_out)
            if subset:
                variants[f"catchup_without_k{left_out}"] = ["mix.strategy=catchup", f"mix.layer_set={subset}"]
    return variants


def run_variant(name: str, overrides: list[str], base: RunConfig, seed: int) -> Result:
    config = resolve_with_overrides(base, [*overrides, f"train.seed={seed}"])
    datasets = datasets_from_config(config.data, config.data_seed)
    checkpoint, log = run(config, datasets)
    net = checkpoint.network()
    test = datasets["test"]
    top, bottom = reliance_curves(net, test, batch_size=config.eval.batch_size)
    return Result(
        variant=name,
        seed=seed,
        test_accuracy=eval_accuracy(net, test, batch_size=config.eval.batch_size),
        area_top=reliance_area(top),
        area_bottom=reliance_area(bottom),
        iteration_ms=log.mean_iteration_seconds() * 1000.0,
    )


def write_results(results: list[Result], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(HEADER)
        for r in results:
            writer.writerow([
                r.variant, r.seed, repr(r.test_accuracy), repr(r.area_top),
                repr(r.area_bottom), repr(r.iteration_ms),
            ])


def summarize(results: list[Result], seeds: list[int]) -> None:
    by_key = {(r.variant, r.seed): r for r in results}
    table = Table(title="Ablação (média entre seeds)")
    for column in ("Variante", "Acurácia teste", "Área drop-from-top", "ms/iteração"):
        table.add_column(column)
    for variant in dict.fromkeys(r.variant for r in results):
        rows = [by_key[(variant, s)] for s in seeds if (variant, s) in by_key]
        n = len(rows)
        table.add_row(
            variant,
            f"{sum(r.test_accuracy for r in rows) / n:.2f}%",
            f"{sum(r.area_top for r in rows) / n:.2f}",
            f"{sum(r.iteration_ms for r in rows) / n:.1f}",
        )
    console.print(table)

    def wins(a: str, b: str, metric: str) -> int:
        return sum(
            1 for s in seeds
            if (a, s) in by_key and (b, s) in by_key
            and getattr(by_key[(a, s)], metric) > getattr(by_key[(b, s)], metric)
        )

    if {"catchup", "baseline"} <= {r.variant for r in results}:
        console.print(
            f"  catchup > baseline na área drop-from-top em {wins('catchup', 'baseline', 'area_top')}"
            f"/{len(seeds)} seeds"
        )
        base_ms = [by_key[("baseline", s)].iteration_ms for s in seeds]
        mix_ms = [by_key[("catchup", s)].iteration_ms for s in seeds]
        if sum(base_ms) > 0:
            console.print(f"  custo relativo por iteração: {sum(mix_ms) / sum(base_ms):.3f}×")
    if {"catchup", "random_channel"} <= {r.variant for r in results}:
        console.print(
            f"  random_channel > catchup na acurácia em "
            f"{wins('random_channel', 'catchup', 'test_accuracy')}/{len(seeds)} seeds"
        )


def main() -> None:
    parser = argparse.ArgumentParser(description="Comparação multi-seed das estratégias de mistura")
    parser.add_argument("--config", "-c", type=str, default=None, help="Configuração base (key=value)")
    parser.add_argument("--set", action="append", default=[], metavar="CHAVE=VALOR", help="Override da base")
    parser.add_argument("--seeds", type=str, default="0,1,2", help="Seeds separadas por vírgula")
    parser.add_argument("--epochs", type=int, default=None, help="Sobrescreve train.epochs")
    parser.add_argument("--variants", type=str, default=None, help="Subconjunto das variantes básicas")
    parser.add_argument("--alphas", type=str, default="", help="Busca de α para a mistura de features")
    parser.add_argument("--layer-sets", action="store_true", help="Conjunto completo e cada subconjunto leave-one-out")
    parser.add_argument("--out", "-o", type=str, default="runs/ablation", help="Diretório do ablation.csv")
    args = parser.parse_args()

    console.print("=" * 60)
    console.print("  Ablação – mistura de features por camada")
    console.print("=" * 60)

    try:
        overrides = list(args.set)
        if args.epochs is not None:
            overrides.append(f"train.epochs={args.epochs}")
        base = load_run_config(args.config, overrides)
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except (CumError, ValueError) as e:
        console.print(f"[red]✗ {e}[/red]")
        sys.exit(exit_code_for(e) if isinstance(e, CumError) else 2)

    variants = build_variants(base, alphas, args.layer_sets)
    if args.variants:
        wanted = {v.strip() for v in args.variants.split(",")}
        variants = {name: o for name, o in variants.items() if name in wanted or name not in BASE_VARIANTS}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    total = len(variants) * len(seeds)
    console.print(f"\n[1/3] {len(variants)} variantes × {len(seeds)} seeds = {total} treinos "
                  f"({base.train.epochs} épocas cada)")

    console.print("[2/3] Treinando...")
    results: list[Result] = []
    for name, variant_overrides in variants.items():
        for seed in seeds:
            try:
                result = run_variant(name, variant_overrides, base, seed)
            except CumError as e:
                console.print(f"  [red]✗ {name} seed {seed}: {e}[/red]")
                continue
            results.append(result)
            console.print(
                f"  {name:<24} seed {seed} | teste {result.test_accuracy:.2f}% | "
                f"área top {result.area_top:.2f} | {result.iteration_ms:.1f} ms/it"
            )

    console.print("[3/3] Resultados")
    write_results(results, out / "ablation.csv")
    if results:
        summarize(results, seeds)
    console.print(f"\n[green]✓ {len(results)}/{total} treinos gravados em {out / 'ablation.csv'}[/green]")


if __name__ == "__main__":
    main()
