"""Minimal tensor algebra with reverse-mode differentiation and optimizers."""

from grnformer.core.tensor import (
    Tensor,
    ComputationTape,
    active_tape,
    backward,
    constant,
    parameter,
    matmul,
    add,
    sub,
    mul,
    scale,
    square,
    relu,
    sum_all,
    mean_all,
    transpose,
    reshape,
    softmax_rows,
    concat_cols,
    slice_cols,
    gather_rows,
    layer_norm_rows,
)
from grnformer.core.optim import OptimizerState, optimizer_step
from grnformer.core.random import Stream, stream

__all__ = [
    "Tensor",
    "ComputationTape",
    "active_tape",
    "backward",
    "constant",
    "parameter",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "square",
    "relu",
    "sum_all",
    "mean_all",
    "transpose",
    "reshape",
    "softmax_rows",
    "concat_cols",
    "slice_cols",
    "gather_rows",
    "layer_norm_rows",
    "OptimizerState",
    "optimizer_step",
    "Stream",
    "stream",
]
