"""
Diretório de execução: criado de forma exclusiva, com manifest.json gravado
antes do trabalho começar e regravado ao final com o status e os artefatos.
"""

from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path
from typing import Any

from src import __version__
from src.errors import ConfigError, exit_code_for
from src.models.schemas import RunManifest

MANIFEST_NAME = "manifest.json"


class RunDirectory:
    """Dono exclusivo de um diretório de saída."""

    def __init__(self, path: str | Path, command: str, config: dict[str, Any] | None = None, seed: int | None = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self.path.mkdir(exist_ok=False)
        except FileExistsError as e:
            raise ConfigError(f"diretório de saída já existe: {self.path}", key="--out") from e
        self.manifest = RunManifest(
            command=command,
            tool_version=__version__,
            config=dict(config or {}),
            seed=seed,
            started_at=datetime.now().isoformat(),
            artifacts=[MANIFEST_NAME],
        )
        self.write_manifest()

    def file(self, name: str) -> Path:
        """Caminho de um artefato, já registrado no manifest."""
        path = self.path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.register(path)
        return path

    def register(self, path: str | Path) -> None:
        relative = Path(path).relative_to(self.path).as_posix()
        if relative not in self.manifest.artifacts:
            self.manifest.artifacts.append(relative)

    def write_manifest(self) -> None:
        text = json.dumps(self.manifest.model_dump(mode="json"), indent=2, ensure_ascii=False)
        (self.path / MANIFEST_NAME).write_text(text + "\n", encoding="utf-8")

    def finish(self, exit_code: int) -> None:
        # artefatos registrados mas não gravados (falha no meio) saem da lista
        self.manifest.artifacts = [
            name for name in self.manifest.artifacts
            if name == MANIFEST_NAME or (self.path / name).exists()
        ]
        self.manifest.finished_at = datetime.now().isoformat()
        self.manifest.exit_code = exit_code
        self.manifest.status = "ok" if exit_code == 0 else "failed"
        self.write_manifest()

    def __enter__(self) -> RunDirectory:
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.finish(0 if exc is None else exit_code_for(exc))
