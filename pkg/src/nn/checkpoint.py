"""
Checkpoint: cabeçalho JSON (spec em texto canônico + hash) seguido dos tensores CUMTEN1.

Layout:
  b"CUMCKPT1\\n" | u64 LE tamanho do cabeçalho | cabeçalho JSON (UTF-8) | tensores na ordem de "tensors"

O cabeçalho guarda o sha256 dos bytes dos tensores (payload_sha256).
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from src.errors import ArtifactIntegrityError, ShapeError
from src.models.schemas import NetworkSpec
from src.nn.network import Network
from src.tensor.codec import decode_tensor, encode_tensor

MAGIC = b"CUMCKPT1\n"


def canonical_text(spec: NetworkSpec) -> str:
    """JSON compacto com chaves ordenadas; base do hash da spec."""
    return json.dumps(spec.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def spec_hash(spec: NetworkSpec) -> str:
    return hashlib.sha256(canonical_text(spec).encode("utf-8")).hexdigest()


@dataclass
class Checkpoint:
    spec: NetworkSpec
    arrays: dict[str, np.ndarray]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def spec_hash(self) -> str:
        return spec_hash(self.spec)

    @classmethod
    def from_network(cls, network: Network, meta: dict[str, Any] | None = None) -> Checkpoint:
        arrays = {name: np.array(value, copy=True) for name, value in network.state_arrays().items()}
        return cls(network.spec, arrays, dict(meta or {}))

    def network(self) -> Network:
        """Rede em modo avaliação com os pesos do checkpoint."""
        try:
            return Network.from_arrays(self.spec, self.arrays).eval()
        except (KeyError, ShapeError) as e:
            raise ArtifactIntegrityError(f"tensores do checkpoint não batem com a spec: {e}") from e


def save_checkpoint(path: str | Path, checkpoint: Checkpoint) -> None:
    names = list(checkpoint.arrays)
    payload = b"".join(encode_tensor(checkpoint.arrays[name]) for name in names)
    header = {
        "spec": json.loads(canonical_text(checkpoint.spec)),
        "spec_hash": checkpoint.spec_hash,
        "meta": checkpoint.meta,
        "tensors": names,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    Path(path).write_bytes(MAGIC + struct.pack("<Q", len(header_bytes)) + header_bytes + payload)


def load_checkpoint(path: str | Path, expected_hash: str | None = None) -> Checkpoint:
    """Lê e valida um checkpoint.

    Args:
        path: arquivo gravado por `save_checkpoint`.
        expected_hash: hash de spec exigido (ex.: o da configuração corrente).

    Raises:
        FileNotFoundError: arquivo inexistente.
        ArtifactIntegrityError: bytes corrompidos, hash divergente ou tensores faltando.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint não encontrado: {path}")
    buffer = path.read_bytes()
    if not buffer.startswith(MAGIC) or len(buffer) < len(MAGIC) + 8:
        raise ArtifactIntegrityError(f"{path} não é um checkpoint CUMCKPT1")
    (size,) = struct.unpack_from("<Q", buffer, len(MAGIC))
    start = len(MAGIC) + 8
    try:
        header = json.loads(buffer[start:start + size].decode("utf-8"))
        spec = NetworkSpec.model_validate(header["spec"])
        names = list(header["tensors"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValidationError) as e:
        raise ArtifactIntegrityError(f"cabeçalho do checkpoint ilegível em {path}: {e}") from e

    actual = spec_hash(spec)
    if header.get("spec_hash") != actual:
        raise ArtifactIntegrityError(f"hash da spec não confere em {path}")
    if expected_hash is not None and expected_hash != actual:
        raise ArtifactIntegrityError(
            f"checkpoint {path} foi treinado com outra spec ({actual[:12]} ≠ {expected_hash[:12]})"
        )

    offset = start + size
    if hashlib.sha256(buffer[offset:]).hexdigest() != header.get("payload_sha256"):
        raise ArtifactIntegrityError(f"tensores corrompidos em {path} (checksum não confere)")
    arrays: dict[str, np.ndarray] = {}
    for name in names:
        arrays[name], offset = decode_tensor(buffer, offset)
    if offset != len(buffer):
        raise ArtifactIntegrityError(f"bytes excedentes no fim de {path}")
    checkpoint = Checkpoint(spec, arrays, header.get("meta", {}))
    checkpoint.network()
    return checkpoint
