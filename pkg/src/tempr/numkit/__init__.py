"""Minimal differentiable numeric core: float64 tensors, reverse-mode autodiff,
the attention/normalization ops the towers need, AdamW, and the step lr schedule."""

from .attention import AttentionParams, attention_weights, init_attention, multi_head_attention
from .gradcheck import check_gradients, max_rel_error, numerical_grad
from .optim import AdamW, AdamWState, adamw_step, lr_schedule
from .tensor import (
    NumericError,
    ShapeError,
    Tensor,
    add,
    check_finite,
    clip_max,
    concat,
    conv3d,
    exp,
    gelu,
    layernorm,
    log,
    matmul,
    max_,
    mean,
    mul,
    no_grad,
    parameter,
    power,
    reshape,
    sigmoid,
    softmax,
    stack,
    sum_,
    tensor,
    transpose,
)

__all__ = [
    "AdamW", "AdamWState", "AttentionParams", "NumericError", "ShapeError", "Tensor",
    "adamw_step", "add", "attention_weights", "check_finite", "check_gradients", "clip_max", "concat",
    "conv3d", "exp", "gelu", "init_attention", "layernorm", "log", "lr_schedule", "matmul",
    "max_", "max_rel_error", "mean", "mul", "multi_head_attention", "no_grad", "numerical_grad",
    "parameter", "power", "reshape", "sigmoid", "softmax", "stack", "sum_", "tensor", "transpose",
]
