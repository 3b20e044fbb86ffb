"""
Leitura do arquivo de configuração key=value (chaves pontuadas: mix.alpha=10).

O arquivo é lido com python-dotenv sem interpolação; overrides `--set chave=valor`
são aplicados depois do arquivo. Chaves desconhecidas são erro.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable

from dotenv import dotenv_values
from pydantic import ValidationError

from src.errors import ConfigError
from src.models.schemas import RunConfig

SECTIONS = ("network", "mix", "optim", "train", "data", "eval")


def known_keys() -> set[str]:
    keys = set()
    for section in SECTIONS:
        model = RunConfig.model_fields[section].annotation
        keys.update(f"{section}.{name}" for name in model.model_fields)
    return keys


def parse_overrides(items: Iterable[str]) -> dict[str, str]:
    """['mix.alpha=10', ...] -> {'mix.alpha': '10'}."""
    overrides: dict[str, str] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"override inválido '{item}' (esperado chave=valor)", key=item)
        overrides[key.strip()] = value.strip()
    return overrides


def _nest(flat: dict[str, str]) -> dict[str, dict[str, Any]]:
    allowed = known_keys()
    nested: dict[str, dict[str, Any]] = {}
    for key, value in flat.items():
        if key not in allowed:
            raise ConfigError(f"chave de configuração desconhecida: {key}", key=key)
        section, name = key.split(".", 1)
        if value is None or value == "":
            continue
        nested.setdefault(section, {})[name] = value
    return nested


def build_config(flat: dict[str, str]) -> RunConfig:
    try:
        return RunConfig.model_validate(_nest(flat))
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"valor inválido para {key or 'configuração'}: {first['msg']}", key=key or None) from e


def load_run_config(path: str | Path | None, overrides: Iterable[str] = ()) -> RunConfig:
    """Resolve a configuração: arquivo (opcional) + overrides.

    Raises:
        ConfigError: arquivo ausente, chave desconhecida ou valor inválido
            (a mensagem nomeia o caminho ou a chave).
    """
    flat: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"arquivo de configuração não encontrado: {path}", key=str(path))
        flat.update({k: v for k, v in dotenv_values(path, interpolate=False).items()})
    flat.update(parse_overrides(overrides))
    return build_config(flat)


def flatten_config(config: RunConfig) -> dict[str, str]:
    """Inverso de `build_config`: RunConfig -> {'mix.alpha': '10.0', ...}.

    Listas viram '0,1,2'; campos None são omitidos.
    """
    flat: dict[str, str] = {}
    for section, values in config.model_dump(mode="json").items():
        for name, value in values.items():
            if value is None:
                continue
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            flat[f"{section}.{name}"] = str(value)
    return flat


def resolve_with_overrides(base: RunConfig, overrides: Iterable[str] = ()) -> RunConfig:
    """Aplica overrides `chave=valor` sobre uma configuração já resolvida."""
    flat = flatten_config(base)
    flat.update(parse_overrides(overrides))
    return build_config(flat)
