"""
Laço de treino com mistura em uma fronteira sorteada a cada iteração.

Ordem fixa dos sorteios no gerador de mistura por iteração:
  aplicar? (mix.prob) → λ → k → permutação → máscaras/caixa.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from src.data.dataset import Dataset, iterate_batches, one_hot
from src.data.storage import datasets_from_config
from src.data.transforms import standard_augment
from src.errors import ConfigError, LayerIndexError, ShapeError
from src.mix.baselines import cutmix, input_mixup, random_channel_mix
from src.mix.catchup import catchup_mix_batch, mix_labels
from src.mix.plan import MixAuditLog, MixPlan
from src.mix.sampling import sample_lambda, sample_layer
from src.models.schemas import MixConfig, RunConfig
from src.monitoring.monitor import EpochMetrics, EpochTiming, MetricLog, log_event
from src.nn.checkpoint import Checkpoint
from src.nn.network import Network, build
from src.nn.presets import get_preset
from src.tensor.core import Tensor, backward, no_grad, reset_tape
from src.tensor.ops import softmax_cross_entropy
from src.train.optim import SGD, Schedule, lr_at


@dataclass
class ForcedMix:
    """Substitui sorteios de uma iteração (os sorteios acontecem mesmo assim)."""
    lam: float | None = None
    layer: int | None = None
    perm: np.ndarray | None = None
    apply: bool | None = None


@dataclass
class TrainState:
    network: Network
    optimizer: SGD
    mix: MixConfig
    data_rng: np.random.Generator
    mix_rng: np.random.Generator
    epoch: int = 0
    iteration: int = 0
    layer_usage: Counter = field(default_factory=Counter)
    last_plan: MixPlan | None = None
    last_correct: int = 0
    audit: MixAuditLog | None = None

    @classmethod
    def create(cls, network: Network, config: RunConfig, audit: MixAuditLog | None = None) -> TrainState:
        data_seq, mix_seq = np.random.SeedSequence(config.train.seed).spawn(2)
        optimizer = SGD(
            network.parameters(),
            lr=config.optim.lr,
            momentum=config.optim.momentum,
            weight_decay=config.optim.weight_decay,
        )
        return cls(
            network=network,
            optimizer=optimizer,
            mix=config.mix,
            data_rng=np.random.default_rng(data_seq),
            mix_rng=np.random.default_rng(mix_seq),
            audit=audit,
        )


def train_iteration(
    state: TrainState,
    images: np.ndarray,
    labels: np.ndarray,
    lr: float,
    forced: ForcedMix | None = None,
) -> float:
    """Um passo: sorteia λ e k, mistura, perda com rótulos suaves, backward, SGD.

    Returns:
        Valor da perda do batch.
    """
    net, mix = state.network, state.mix
    forced = forced or ForcedMix()
    batch = len(images)
    targets = one_hot(labels, net.spec.num_classes)
    mixing = mix.strategy != "none"
    if mixing and batch < 2:
        raise ValueError(f"mistura ativa exige batch ≥ 2, recebeu {batch}")

    apply, lam, k = False, 1.0, 0
    if mixing:
        rng = state.mix_rng
        apply = bool(rng.random() < mix.prob)
        lam = sample_lambda(mix.alpha, rng)
        k = sample_layer(mix.layer_set, rng)
        apply = apply if forced.apply is None else forced.apply
        lam = lam if forced.lam is None else forced.lam
        k = k if forced.layer is None else forced.layer

    reset_tape()
    net.train()
    net.zero_grad()
    x = Tensor(images)
    plan: MixPlan | None = None

    if not apply or (k == 0 and mix.input_mix_kind == "none"):
        logits = net.forward(x)
        target = targets
    elif k == 0:
        perm = state.mix_rng.permutation(batch) if forced.perm is None else np.asarray(forced.perm)
        if mix.input_mix_kind == "input_mixup":
            mixed, label_lam = input_mixup(images, images[perm], lam), lam
        else:
            mixed, label_lam = cutmix(images, images[perm], lam, state.mix_rng)
        logits = net.forward(Tensor(mixed))
        target = mix_labels(targets, targets[perm], label_lam)
        plan = MixPlan(lam=lam, layer=0, perm=perm, strategy=mix.input_mix_kind, label_lam=label_lam)
    else:
        h = net.forward_to(x, k)
        mixer = catchup_mix_batch if mix.strategy == "catchup" else random_channel_mix
        h_mix, target, plan = mixer(h, targets, lam, state.mix_rng, perm=forced.perm, layer=k)
        logits = net.forward_from(h_mix, k)

    loss = softmax_cross_entropy(logits, target)
    backward(loss)
    state.optimizer.step(lr)

    if apply:
        state.layer_usage[k] += 1
    if plan is not None and state.audit is not None:
        state.audit.append(state.iteration, plan)
    state.last_plan = plan
    state.last_correct = int(np.sum(np.argmax(logits.data, axis=1) == labels))
    state.iteration += 1
    return loss.item()


def evaluate(net: Network, dataset: Dataset, batch_size: int = 128) -> tuple[float, float]:
    """(perda média, acurácia %) em modo avaliação."""
    net.eval()
    total_loss, correct = 0.0, 0
    with no_grad():
        for images, labels in iterate_batches(dataset, batch_size):
            logits = net.forward(Tensor(images))
            loss = softmax_cross_entropy(logits, one_hot(labels, net.spec.num_classes))
            total_loss += loss.item() * len(labels)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels))
    return total_loss / len(dataset), 100.0 * correct / len(dataset)


def check_compatibility(net: Network, dataset: Dataset, mix: MixConfig) -> None:
    """Confere dataset e conjunto de camadas contra a rede.

    Raises:
        ConfigError: número de classes, canais ou tamanho de imagem incompatíveis.
        LayerIndexError: fronteira de mistura inexistente.
    """
    spec = net.spec
    if dataset.num_classes != spec.num_classes:
        raise ConfigError(
            f"dataset com {dataset.num_classes} classes para rede com {spec.num_classes}",
            key="data.classes",
        )
    if dataset.image_shape[0] != spec.in_channels:
        raise ConfigError(
            f"imagens com {dataset.image_shape[0]} canais para rede com {spec.in_channels}",
            key="network.name",
        )
    bad = [k for k in mix.layer_set if not 0 <= k <= net.num_blocks]
    if bad:
        raise LayerIndexError(
            f"fronteiras {bad} fora de [0, {net.num_blocks}] para a rede {spec.name}",
            key="mix.layer_set",
        )
    training = net.training
    try:
        with no_grad():
            net.eval().forward(Tensor(dataset.images[:1]))
    except (ShapeError, ConfigError) as e:
        raise ConfigError(f"imagens {dataset.image_shape} incompatíveis com {spec.name}: {e}", key="data.image_size") from e
    finally:
        net.training = training


def run(
    config: RunConfig,
    datasets: dict[str, Dataset] | None = None,
    run_dir: str | Path | None = None,
    on_epoch: Callable[[EpochMetrics, EpochTiming], None] | None = None,
) -> tuple[Checkpoint, MetricLog]:
    """Treino completo; devolve o checkpoint de melhor validação (empate: o mais recente).

    Args:
        config: configuração resolvida.
        datasets: splits já carregados (senão vêm de config.data).
        run_dir: diretório para events.jsonl e mix_audit.csv.
        on_epoch: chamado ao fim de cada época.
    """
    datasets = datasets or datasets_from_config(config.data, config.data_seed)
    train_set, val_set = datasets["train"], datasets["val"]
    spec = get_preset(config.network.name, train_set.num_classes)
    net = build(spec, config.init_seed)
    check_compatibility(net, train_set, config.mix)

    run_dir = Path(run_dir) if run_dir is not None else None
    events = run_dir / "events.jsonl" if run_dir is not None else None
    audit = MixAuditLog(run_dir / "mix_audit.csv") if run_dir is not None and config.mix.audit else None

    state = TrainState.create(net, config, audit)
    schedule = Schedule.from_config(config.optim, config.train.epochs)
    log = MetricLog()
    min_size = 2 if config.mix.strategy != "none" else 1
    augment = standard_augment if config.data.augment else None
    snapshot = config.model_dump(mode="json")
    best: Checkpoint | None = None
    best_acc = -1.0

    for epoch in range(config.train.epochs):
        state.epoch = epoch
        lr = lr_at(schedule, epoch)
        usage_before = Counter(state.layer_usage)
        total_loss, correct, seen, iterations = 0.0, 0, 0, 0
        started = time.perf_counter()
        for images, labels in iterate_batches(
            train_set, config.train.batch_size, state.data_rng, augment, min_size=min_size,
        ):
            loss = train_iteration(state, images, labels, lr)
            total_loss += loss * len(labels)
            correct += state.last_correct
            seen += len(labels)
            iterations += 1
        wall = time.perf_counter() - started

        val_loss = val_acc = None
        last_epoch = epoch == config.train.epochs - 1
        if (epoch + 1) % config.train.eval_every == 0 or last_epoch:
            val_loss, val_acc = evaluate(net, val_set, config.eval.batch_size)

        usage = state.layer_usage - usage_before
        row = EpochMetrics(
            epoch=epoch,
            lr=lr,
            train_loss=total_loss / max(seen, 1),
            train_accuracy=100.0 * correct / max(seen, 1),
            val_loss=val_loss,
            val_accuracy=val_acc,
            layer_usage=dict(usage),
        )
        timing = EpochTiming(epoch=epoch, wall_seconds=wall, iterations=iterations)
        log.append(row, timing)
        if events is not None:
            log_event(events, "epoch_end", epoch=epoch, train_loss=row.train_loss,
                      train_accuracy=row.train_accuracy, val_accuracy=val_acc, seconds=wall)

        if val_acc is not None and val_acc >= best_acc:
            best_acc = val_acc
            best = Checkpoint.from_network(net, meta={
                "epoch": epoch,
                "val_accuracy": float(val_acc),
                "config": snapshot,
                "dataset_hash": train_set.content_hash(),
            })
            if events is not None:
                log_event(events, "checkpoint_selected", epoch=epoch, val_accuracy=val_acc)
        if on_epoch is not None:
            on_epoch(row, timing)

    assert best is not None  # a última época sempre avalia
    return best, log
