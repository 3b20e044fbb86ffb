"""
Entry point da CLI de treino e análise com mistura de features por camada.

Uso:
  # Gerar o dataset sintético (8 classes, 32×32):
  python main.py gen-data --out data/synthetic-8

  # Treinar com a configuração de um arquivo e overrides:
  python main.py train --config configs/catchup.cfg --set mix.alpha=10 --out runs/catchup

  # Robustez (FGSM 4/255, deformações e corrupções):
  python main.py eval --checkpoint runs/catchup/checkpoint.ckpt --fgsm --deform --corrupt --out runs/catchup-eval

  # Análises:
  python main.py analyze --checkpoint runs/catchup/checkpoint.ckpt --reliance --out runs/catchup-reliance
  python main.py analyze --checkpoint runs/catchup/checkpoint.ckpt --hist 3 --out runs/catchup-hist3
  python main.py landscape --checkpoint runs/catchup/checkpoint.ckpt --out runs/catchup-landscape
  python main.py ood --checkpoint runs/catchup/checkpoint.ckpt --out runs/catchup-ood
"""

from __future__ import annotations

import sys

from dotenv import load_dotenv

load_dotenv()

from src.cli.app import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
