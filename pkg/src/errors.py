"""
Hierarquia de exceções do toolkit.

Cada família corresponde a um código de saída estável da CLI:
  ConfigError            -> 2 (uso/configuração)
  ArtifactIntegrityError -> 4 (checkpoint ou tensor corrompido)
  demais CumError        -> 3 (falha em tempo de execução)
"""

from __future__ import annotations


class CumError(Exception):
    """Base de todos os erros do toolkit."""


class ConfigError(CumError, ValueError):
    """Configuração inválida; a mensagem sempre nomeia a chave ou o caminho."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class LayerIndexError(ConfigError):
    """Índice de fronteira de bloco fora do intervalo da rede."""


class ShapeError(CumError, ValueError):
    """Formas de tensores incompatíveis para a operação pedida."""


class GradientError(CumError, RuntimeError):
    """Uso indevido do backward (perda não escalar, desanexada ou repetida)."""


class DegenerateInfluenceError(CumError, ArithmeticError):
    """Soma das influências de filtro igual a zero (mapa de ativação nulo)."""


class DatasetError(CumError, ValueError):
    """Manifesto, linha ou imagem inválida em um dataset em disco."""


class ArtifactIntegrityError(CumError):
    """Arquivo binário corrompido ou hash de especificação divergente."""


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INTEGRITY = 4


def exit_code_for(error: BaseException) -> int:
    """Mapeia uma exceção para o contrato de códigos de saída da CLI."""
    if isinstance(error, ArtifactIntegrityError):
        return EXIT_INTEGRITY
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    return EXIT_RUNTIME
