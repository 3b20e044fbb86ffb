"""
Formato binário CUMTEN1 para tensores.

Layout: b"CUMTEN1" | u8 código do dtype | u8 rank | rank × u64 LE dims | elementos LE (row-major).
Usado em checkpoints, datasets empacotados e ativações gravadas.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from src.errors import ArtifactIntegrityError
from src.tensor.core import Tensor

MAGIC = b"CUMTEN1"

DTYPE_CODES: dict[int, np.dtype] = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("<i8"),
    3: np.dtype("<i4"),
    4: np.dtype("u1"),
}
_CODE_FOR_KIND = {(dt.kind, dt.itemsize): code for code, dt in DTYPE_CODES.items()}


def encode_tensor(value: Tensor | np.ndarray) -> bytes:
    """Serializa um tensor ou array no formato CUMTEN1."""
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    code = _CODE_FOR_KIND.get((array.dtype.kind, array.dtype.itemsize))
    if code is None:
        raise ValueError(f"dtype não suportado pelo CUMTEN1: {array.dtype}")
    if array.ndim > 255:
        raise ValueError(f"rank {array.ndim} excede o limite do formato")
    header = MAGIC + struct.pack("<BB", code, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    body = np.ascontiguousarray(array, dtype=DTYPE_CODES[code]).tobytes(order="C")
    return header + body


def decode_tensor(buffer: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Lê um tensor CUMTEN1 a partir de `offset`.

    Returns:
        (array, offset logo após o tensor).

    Raises:
        ArtifactIntegrityError: magic inválido, dtype desconhecido ou bytes truncados.
    """
    end = offset + len(MAGIC) + 2
    if len(buffer) < end or buffer[offset:offset + len(MAGIC)] != MAGIC:
        raise ArtifactIntegrityError(f"cabeçalho CUMTEN1 inválido no offset {offset}")
    code, rank = struct.unpack_from("<BB", buffer, offset + len(MAGIC))
    if code not in DTYPE_CODES:
        raise ArtifactIntegrityError(f"código de dtype desconhecido: {code}")
    if len(buffer) < end + 8 * rank:
        raise ArtifactIntegrityError("dimensões truncadas no tensor CUMTEN1")
    shape = struct.unpack_from(f"<{rank}Q", buffer, end)
    end += 8 * rank
    dtype = DTYPE_CODES[code]
    count = int(np.prod(shape, dtype=np.int64)) if rank else 1
    nbytes = count * dtype.itemsize
    if len(buffer) < end + nbytes:
        raise ArtifactIntegrityError(
            f"tensor truncado: esperava {nbytes} bytes de dados, há {len(buffer) - end}"
        )
    array = np.frombuffer(buffer, dtype=dtype, count=count, offset=end).reshape(shape)
    return array.astype(dtype.newbyteorder("="), copy=True), end + nbytes


def save_tensor(path: str | Path, value: Tensor | np.ndarray) -> None:
    Path(path).write_bytes(encode_tensor(value))


def load_tensor(path: str | Path) -> np.ndarray:
    """Carrega um arquivo contendo exatamente um tensor CUMTEN1."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"tensor não encontrado: {path}")
    buffer = path.read_bytes()
    array, end = decode_tensor(buffer)
    if end != len(buffer):
        raise ArtifactIntegrityError(f"bytes excedentes após o tensor em {path}")
    return array
