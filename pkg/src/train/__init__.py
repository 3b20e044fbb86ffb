from src.train.loop import ForcedMix, TrainState, check_compatibility, evaluate, run, train_iteration
from src.train.optim import SGD, Schedule, lr_at

__all__ = [
    "ForcedMix",
    "TrainState",
    "check_compatibility",
    "evaluate",
    "run",
    "train_iteration",
    "SGD",
    "Schedule",
    "lr_at",
]
