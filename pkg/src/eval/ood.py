"""
Detecção fora de distribuição com a probabilidade máxima do softmax (MSP).

Convenção: score maior = mais "dentro da distribuição"; a classe positiva
das métricas é a distribuição de treino.
"""

from __future__ import annotations

import numpy as np
from sklearn.metrics import average_precision_score, roc_auc_score, roc_curve

from src.data.dataset import Dataset
from src.eval.parallel import parallel_map
from src.models.schemas import OODReport
from src.nn.network import Network
from src.tensor.core import Tensor, no_grad
from src.tensor.ops import softmax


def msp_scores(net: Network, dataset: Dataset, batch_size: int = 128) -> np.ndarray:
    net.eval()
    chunks = [slice(s, min(s + batch_size, len(dataset))) for s in range(0, len(dataset), batch_size)]

    def run(chunk: slice) -> np.ndarray:
        with no_grad():
            logits = net.forward(Tensor(dataset.images[chunk])).data.astype(np.float64)
        return softmax(logits).max(axis=1)

    return np.concatenate(parallel_map(run, chunks))


def fpr_at_tpr(y_true: np.ndarray, scores: np.ndarray, target: float = 0.95) -> float:
    """FPR no limiar que atinge `target` de TPR (interpolação linear entre TPRs atingíveis)."""
    fpr, tpr, _ = roc_curve(y_true, scores, drop_intermediate=False)
    idx = int(np.searchsorted(tpr, target, side="left"))
    if tpr[idx] == target or idx == 0:
        return float(fpr[idx])
    t0, t1 = tpr[idx - 1], tpr[idx]
    f0, f1 = fpr[idx - 1], fpr[idx]
    return float(f0 + (f1 - f0) * (target - t0) / (t1 - t0))


def ood_metrics(scores_in: np.ndarray, scores_out: np.ndarray) -> OODReport:
    """FPR95, AUROC e AUPR (distribuição de treino como positiva).

    Raises:
        ValueError: lista de scores vazia.
    """
    scores_in = np.asarray(scores_in, dtype=np.float64).ravel()
    scores_out = np.asarray(scores_out, dtype=np.float64).ravel()
    if scores_in.size == 0 or scores_out.size == 0:
        raise ValueError("as duas listas de scores precisam ser não vazias")
    y_true = np.concatenate([np.ones(scores_in.size), np.zeros(scores_out.size)])
    scores = np.concatenate([scores_in, scores_out])
    return OODReport(
        fpr95=fpr_at_tpr(y_true, scores),
        auroc=float(roc_auc_score(y_true, scores)),
        aupr=float(average_precision_score(y_true, scores)),
        n_in=int(scores_in.size),
        n_out=int(scores_out.size),
    )
