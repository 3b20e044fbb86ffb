"""Fixtures compartilhadas: geradores com seed, redes pequenas e datasets sintéticos."""

from __future__ import annotations

import numpy as np
import pytest

from src.data.synthetic import generate_synthetic
from src.nn.network import build
from src.nn.presets import tiny2


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="executa os experimentos longos")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="experimento longo: use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture
def tiny_spec():
    return tiny2(num_classes=4)


@pytest.fixture
def tiny_net(tiny_spec):
    return build(tiny_spec, init_seed=0)


@pytest.fixture
def tiny_net64(tiny_spec):
    return build(tiny_spec, init_seed=0, dtype=np.float64)


@pytest.fixture(scope="session")
def small_dataset():
    """4 classes × 6 amostras, 8×8."""
    return generate_synthetic(classes=4, per_class=6, image_size=8, seed=0, split="train")


@pytest.fixture(scope="session")
def small_eval_dataset():
    return generate_synthetic(classes=4, per_class=5, image_size=8, seed=1, split="test")
