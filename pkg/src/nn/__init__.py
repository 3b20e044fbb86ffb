from src.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint, spec_hash
from src.nn.network import Network, build, validate_spec
from src.nn.presets import PRESETS, get_preset

__all__ = [
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "spec_hash",
    "Network",
    "build",
    "validate_spec",
    "PRESETS",
    "get_preset",
]
