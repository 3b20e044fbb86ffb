from src.config.loader import (
    build_config,
    flatten_config,
    known_keys,
    load_run_config,
    parse_overrides,
    resolve_with_overrides,
)
from src.config.settings import worker_count

__all__ = [
    "build_config",
    "flatten_config",
    "known_keys",
    "load_run_config",
    "parse_overrides",
    "resolve_with_overrides",
    "worker_count",
]
