from src.tensor.core import (
    Tape,
    Tensor,
    backward,
    current_tape,
    default_dtype,
    grad_enabled,
    no_grad,
    precision,
    reset_tape,
)
from src.tensor.ops import (
    RunningStats,
    batchnorm2d,
    conv2d,
    elementwise,
    global_avg_pool,
    index_select_batch,
    linear,
    matmul,
    mean,
    pool2d,
    relu,
    reshape,
    softmax,
    softmax_cross_entropy,
    tensor_sum,
)

__all__ = [
    "RunningStats", "Tape", "Tensor", "backward", "batchnorm2d", "conv2d", "current_tape",
    "default_dtype", "elementwise", "global_avg_pool", "grad_enabled", "index_select_batch",
    "linear", "matmul", "mean", "no_grad", "pool2d", "precision", "relu", "reset_tape",
    "reshape", "softmax", "softmax_cross_entropy", "tensor_sum",
]
