from .ops import (
    EdgePattern,
    add,
    concat,
    cross_entropy,
    dropout,
    gelu,
    layer_norm,
    linear,
    matmul,
    mse_mean,
    mul,
    relu,
    replace_rows,
    reshape,
    row_sq_dist,
    scale,
    softmax_rows,
    spmm,
    stack,
    sub,
    sum_all,
    transpose,
)
from .optim import Optimizer, glorot_init, ones, zeros
from .tensor import (
    DimensionError,
    NonFiniteError,
    StateError,
    Tape,
    Tensor,
    as_tensor,
    backward,
    no_grad,
)


def elementwise(op: str, *inputs, scalar: float | None = None):
    """Dispatch ``op`` in {add, sub, mul, scale, relu, gelu} by name."""
    if op == "add":
        return add(*inputs)
    if op == "sub":
        return sub(*inputs)
    if op == "mul":
        return mul(*inputs)
    if op == "scale":
        return scale(inputs[0], scalar)
    if op == "relu":
        return relu(*inputs)
    if op == "gelu":
        return gelu(*inputs)
    raise ValueError(f"unknown elementwise op {op!r}")
