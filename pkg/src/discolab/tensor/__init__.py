"""Numpy tensors with reverse-mode autodiff, Adam, and gradient checks."""

from .core import (
    KinkMonitor,
    Tensor,
    add,
    as_tensor,
    clamp,
    concat,
    conv2d,
    is_grad_enabled,
    l1_loss,
    linear,
    matmul,
    max_pool2d,
    mean,
    mul,
    neg,
    no_grad,
    relu,
    reshape,
    softmax_cross_entropy,
    sub,
    take,
    track_kinks,
    transpose,
    tsum,
    unfold,
)
from .gradcheck import finite_diff_check, param_finite_diff_check
from .optim import Adam, AdamState, adam_step

__all__ = [
    "Adam",
    "AdamState",
    "KinkMonitor",
    "Tensor",
    "adam_step",
    "add",
    "as_tensor",
    "clamp",
    "concat",
    "conv2d",
    "finite_diff_check",
    "is_grad_enabled",
    "l1_loss",
    "linear",
    "matmul",
    "max_pool2d",
    "mean",
    "mul",
    "neg",
    "no_grad",
    "param_finite_diff_check",
    "relu",
    "reshape",
    "softmax_cross_entropy",
    "sub",
    "take",
    "track_kinks",
    "transpose",
    "tsum",
    "unfold",
]
