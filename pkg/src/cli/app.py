"""
Parser da linha de comando e despacho para os subcomandos.

Códigos de saída: 0 sucesso, 2 uso/configuração, 3 falha em execução,
4 integridade de artefato.
"""

from __future__ import annotations

import argparse
from typing import Sequence

from src import __version__
from src.cli.commands import COMMANDS, SYNTHETIC_DISJOINT, console
from src.errors import CumError, exit_code_for


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", type=str, default=None, help="Arquivo key=value com a configuração")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="CHAVE=VALOR",
        help="Override de configuração (repetível), aplicado depois do arquivo",
    )
    parser.add_argument("--out", "-o", type=str, required=True, help="Diretório de saída (não pode existir)")


def _checkpoint_args(parser: argparse.ArgumentParser) -> None:
    _common(parser)
    parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint gravado por 'train'")
    parser.add_argument(
        "--data",
        type=str,
        default=None,
        help="Split em disco para avaliar (diretório ou manifest.csv); padrão: split de teste da configuração",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="catchup-mix",
        description="Treino e análise de robustez de CNNs com mistura de features por camada",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Gera os splits sintéticos (ou converte um dataset em disco)")
    _common(p)
    p.add_argument("--format", choices=["packed", "png"], default=None, help="Formato em disco (padrão: data.format)")

    p = sub.add_parser("train", help="Treina uma rede e grava o checkpoint de melhor validação")
    _common(p)

    p = sub.add_parser("eval", help="Acurácia limpa e suítes de robustez")
    _checkpoint_args(p)
    p.add_argument(
        "--fgsm",
        type=float,
        nargs="?",
        const=4 / 255,
        default=None,
        metavar="EPS",
        help="Ataque FGSM com raio ℓ∞ EPS (padrão 4/255)",
    )
    p.add_argument("--deform", action="store_true", help="Grade de rotação, cisalhamento e zoom")
    p.add_argument("--corrupt", action="store_true", help="Corrupções em 5 severidades e mCE")

    p = sub.add_parser("analyze", help="Dependência do vetor latente, histograma de normas ou OOD")
    _checkpoint_args(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--reliance", action="store_true", help="Curvas drop-from-top / drop-from-bottom")
    mode.add_argument("--hist", type=int, default=None, metavar="K", help="Histograma ativação × gradiente do bloco K")
    mode.add_argument(
        "--ood",
        type=str,
        default=None,
        metavar="DATASET",
        help=f"Dataset fora de distribuição (caminho ou '{SYNTHETIC_DISJOINT}')",
    )

    p = sub.add_parser("landscape", help="Superfície de perda em direções normalizadas por filtro")
    _checkpoint_args(p)
    p.add_argument("--grid-n", type=int, default=21, help="Pontos por eixo (ímpar)")
    p.add_argument("--span", type=float, default=1.0, help="Alcance de cada eixo")
    p.add_argument("--seed", type=int, default=0, help="Semente das direções")
    p.add_argument("--max-samples", type=int, default=256, help="Amostras usadas em cada ponto")

    p = sub.add_parser("ood", help="Detecção fora de distribuição (FPR95, AUROC, AUPR)")
    _checkpoint_args(p)
    p.add_argument(
        "--ood-data",
        type=str,
        default=SYNTHETIC_DISJOINT,
        metavar="DATASET",
        help=f"Dataset fora de distribuição (caminho ou '{SYNTHETIC_DISJOINT}')",
    )
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CumError as e:
        code = exit_code_for(e)
        key = getattr(e, "key", None)
        suffix = f" [dim](chave: {key})[/dim]" if key else ""
        console.print(f"[red]✗ {e}[/red]{suffix}")
        return code
    except Exception as e:
        console.print(f"[red]✗ Erro: {e}[/red]")
        return exit_code_for(e)
