from .linalg import ConvergenceError, largest_eigenvalue, lipschitz_constant
from .ops import (
    absolute,
    add,
    clamp_min,
    concat,
    div,
    exemption_mask,
    getitem,
    l1_norm,
    l2_norm,
    log,
    matmul,
    mean,
    mul,
    neg,
    sigmoid,
    soft_threshold,
    softsign,
    square,
    sub,
    sum_,
    support_select_threshold,
    tanh,
    tensor,
    transpose,
    value,
)
from .tape import Node, ShapeError, Tape, Var

__all__ = [
    "ConvergenceError", "largest_eigenvalue", "lipschitz_constant",
    "absolute", "add", "clamp_min", "concat", "div", "exemption_mask", "getitem", "l1_norm",
    "l2_norm", "log", "matmul", "mean", "mul", "neg", "sigmoid", "soft_threshold",
    "softsign", "square", "sub", "sum_", "support_select_threshold", "tanh",
    "tensor", "transpose", "value",
    "Node", "ShapeError", "Tape", "Var",
]
