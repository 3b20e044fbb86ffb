"""
Experimentos direcionais em synthetic-8 reduzido (tiny-4, 3 seeds).

Só rodam com --runslow: cada variante treina três vezes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import pytest

from src.config.loader import load_run_config
from src.data.storage import datasets_from_config
from src.eval.analysis import reliance_area, reliance_curves
from src.eval.robustness import eval_accuracy
from src.monitoring.monitor import MetricLog, layer_usage_pvalue
from src.train.loop import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SEEDS = (0, 1, 2)
REDUCED = [
    "data.per_class_train=120",
    "data.per_class_val=16",
    "data.per_class_test=40",
    "data.seed=0",
    "train.epochs=20",
]

pytestmark = pytest.mark.slow


@dataclass
class Outcome:
    test_accuracy: float
    area_top: float
    log: MetricLog


@pytest.fixture(scope="module")
def outcomes() -> dict[tuple[str, int], Outcome]:
    datasets = None
    results: dict[tuple[str, int], Outcome] = {}
    for variant in ("baseline", "catchup", "random_channel"):
        for seed in SEEDS:
            config = load_run_config(CONFIGS / f"{variant}.cfg", [*REDUCED, f"train.seed={seed}"])
            if datasets is None:
                datasets = datasets_from_config(config.data, config.data_seed)
            checkpoint, log = run(config, datasets)
            net = checkpoint.network()
            top, _ = reliance_curves(net, datasets["test"], batch_size=config.eval.batch_size)
            results[(variant, seed)] = Outcome(
                test_accuracy=eval_accuracy(net, datasets["test"], batch_size=config.eval.batch_size),
                area_top=reliance_area(top),
                log=log,
            )
    return results


class TestDirectional:
    def test_accuracy_kept_and_reliance_spread(self, outcomes):
        wins = 0
        for seed in SEEDS:
            mix, base = outcomes[("catchup", seed)], outcomes[("baseline", seed)]
            if mix.test_accuracy >= base.test_accuracy - 1.0 and mix.area_top > base.area_top:
                wins += 1
        assert wins >= 2

    def test_random_channels_do_not_win(self, outcomes):
        beaten = sum(
            outcomes[("random_channel", seed)].test_accuracy <= outcomes[("catchup", seed)].test_accuracy
            for seed in SEEDS
        )
        assert beaten >= 2

    def test_iteration_overhead(self, outcomes):
        mix = sum(outcomes[("catchup", seed)].log.mean_iteration_seconds() for seed in SEEDS)
        base = sum(outcomes[("baseline", seed)].log.mean_iteration_seconds() for seed in SEEDS)
        assert base > 0
        assert mix <= 1.15 * base

    def test_mix_layers_used_uniformly(self, outcomes):
        layer_set = range(6)
        for seed in SEEDS:
            usage = outcomes[("catchup", seed)].log.layer_usage()
            assert sum(usage.values()) > 0
            assert set(usage) <= set(layer_set)
            assert layer_usage_pvalue(usage, layer_set) > 0.01, seed
