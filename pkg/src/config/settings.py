"""Configurações de ambiente (carregadas do .env pelo entry point)."""

from __future__ import annotations

import os

from src.errors import ConfigError

THREADS_ENV = "CUM_THREADS"


def worker_count() -> int:
    """Limite de threads de avaliação (CUM_THREADS, padrão: núcleos disponíveis)."""
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} deve ser inteiro, recebeu '{raw}'", key=THREADS_ENV) from e
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} deve ser ≥ 1, recebeu {value}", key=THREADS_ENV)
    return value
