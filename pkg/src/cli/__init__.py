from src.cli.app import build_parser, main
from src.cli.rundir import RunDirectory

__all__ = ["build_parser", "main", "RunDirectory"]
