"""Differentiable operations on :class:`Tensor`.

Elementwise ops broadcast like numpy; gradients are summed back to each
operand's shape. Row-wise ops (softmax, layer norm) act on the last axis.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .tensor import DimensionError, StateError, Tensor, as_tensor, record

_GELU_C = math.sqrt(2.0 / math.pi)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return record(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    return record(a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return record(a.data * b.data, (a, b), back)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)

    def back(g):
        a.accumulate(g * c)

    return record(a.data * c, (a,), back)


def relu(a) -> Tensor:
    a = as_tensor(a)
    keep = a.data > 0

    def back(g):
        a.accumulate(g * keep)

    return record(np.where(keep, a.data, 0.0), (a,), back)


def gelu(a) -> Tensor:
    """GELU, tanh approximation."""
    a = as_tensor(a)
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * (x + 0.044715 * x2 * x))
    out = 0.5 * x * (1.0 + t)

    def back(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        a.accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner))

    return record(out, (a,), back)


def matmul(a, b) -> Tensor:
    """Matrix product; leading axes batch as in ``np.matmul``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    if a.ndim > 2 and b.ndim == 2:
        # (..., k) @ (k, n): fold the batch axes so the weight gradient is one GEMM
        flat = reshape(a, (-1, a.shape[-1]))
        return reshape(matmul(flat, b), a.shape[:-1] + (b.shape[1],))

    def back(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return record(a.data @ b.data, (a, b), back)


def softmax_rows(a) -> Tensor:
    """Softmax over the last axis, max-shifted."""
    a = as_tensor(a)
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        a.accumulate(y * (g - (g * y).sum(axis=-1, keepdims=True)))

    return record(y, (a,), back)


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    n = a.shape[-1]
    if n < 2:
        raise DimensionError("layer_norm needs at least two features per row")
    if gain.shape[-1] != n or bias.shape[-1] != n:
        raise DimensionError(f"layer_norm: gain/bias width must be {n}")
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def back(g):
        if gain.requires_grad:
            gain.accumulate(_unbroadcast(g * xhat, gain.shape))
        if bias.requires_grad:
            bias.accumulate(_unbroadcast(g, bias.shape))
        if a.requires_grad:
            gx = g * gain.data
            a.accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True)
                       - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return record(out, (a, gain, bias), back)


def row_sq_dist(a, b) -> np.ndarray:
    """Per-row squared Euclidean distance, no gradient."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} and {b.shape} differ")
    d = (a.data - b.data).reshape(a.shape[0], -1)
    return np.einsum("ij,ij->i", d, d)


def mse_mean(a, b) -> Tensor:
    """(1/rows) * sum over rows of ||a_i - b_i||^2."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"mse_mean: shapes {a.shape} and {b.shape} differ")
    rows = a.shape[0] if a.ndim else 1
    diff = a.data - b.data

    def back(g):
        coef = 2.0 * float(g) / rows
        if a.requires_grad:
            a.accumulate(coef * diff)
        if b.requires_grad:
            b.accumulate(-coef * diff)

    return record(np.array(np.sum(diff * diff) / rows), (a, b), back)


def sum_all(a) -> Tensor:
    a = as_tensor(a)

    def back(g):
        a.accumulate(np.broadcast_to(g, a.shape))

    return record(np.array(a.data.sum()), (a,), back)


def reshape(a, shape: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    old = a.shape

    def back(g):
        a.accumulate(g.reshape(old))

    return record(a.data.reshape(shape), (a,), back)


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = tuple(np.argsort(axes))

    def back(g):
        a.accumulate(np.transpose(g, inverse))

    return record(np.transpose(a.data, axes), (a,), back)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if len({t.shape for t in ts}) != 1:
        raise DimensionError("stack: all inputs must share a shape")

    def back(g):
        for i, t in enumerate(ts):
            if t.requires_grad:
                t.accumulate(np.take(g, i, axis=axis))

    return record(np.stack([t.data for t in ts], axis=axis), ts, back)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    bounds = np.cumsum(sizes)[:-1]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}") from None

    def back(g):
        for t, piece in zip(ts, np.split(g, bounds, axis=axis)):
            if t.requires_grad:
                t.accumulate(piece)

    return record(out, ts, back)


def dropout(a, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Inverted dropout; identity when not training or ``p == 0``."""
    a = as_tensor(a)
    if not training or p <= 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if rng is None:
        raise StateError("dropout in training mode needs a random generator")
    keep = (rng.random(a.shape) >= p) / (1.0 - p)

    def back(g):
        a.accumulate(g * keep)

    return record(a.data * keep, (a,), back)


def replace_rows(base: np.ndarray, rows: np.ndarray, token) -> Tensor:
    """Copy of constant ``base`` with ``rows`` (boolean mask) set to ``token``.

    Only ``token`` (shape ``(1, d)`` or ``(d,)``) receives a gradient.
    """
    token = as_tensor(token)
    base = np.asarray(base, dtype=np.float64)
    rows = np.asarray(rows, dtype=bool)
    if rows.shape != (base.shape[0],):
        raise DimensionError(f"mask of shape {rows.shape} does not match {base.shape[0]} rows")
    if token.data.size != base.shape[1]:
        raise DimensionError(f"token width {token.data.size} != feature width {base.shape[1]}")
    out = base.copy()
    out[rows] = token.data.reshape(-1)

    def back(g):
        token.accumulate(g[rows].sum(axis=0).reshape(token.shape))

    return record(out, (token,), back)


class EdgePattern:
    """Fixed CSR sparsity pattern of an N x N matrix; values are supplied per call."""

    __slots__ = ("indptr", "indices", "rows", "n")

    def __init__(self, indptr: np.ndarray, indices: np.ndarray, n: int):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.n = int(n)
        self.rows = np.repeat(np.arange(self.n), np.diff(self.indptr))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def matrix(self, values: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((values, self.indices, self.indptr), shape=(self.n, self.n))


def spmm(pattern: EdgePattern, values, h) -> Tensor:
    """Sparse (pattern, values) @ dense ``h``; differentiable in values and ``h``."""
    values, h = as_tensor(values), as_tensor(h)
    if values.shape != (pattern.nnz,):
        raise StateError(f"edge weights of shape {values.shape} do not align with {pattern.nnz} pattern entries")
    if h.ndim != 2 or h.shape[0] != pattern.n:
        raise DimensionError(f"spmm: dense operand {h.shape} incompatible with {pattern.n} nodes")
    mat = pattern.matrix(values.data)

    def back(g):
        if h.requires_grad:
            h.accumulate(mat.T @ g)
        if values.requires_grad:
            values.accumulate(np.einsum("ij,ij->i", g[pattern.rows], h.data[pattern.indices]))

    return record(mat @ h.data, (values, h), back)


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy of integer ``labels`` against ``logits`` rows."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    n = logits.shape[0]
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()

    def back(g):
        p = np.exp(logp)
        p[np.arange(n), labels] -= 1.0
        logits.accumulate(float(g) * p / n)

    return record(np.array(loss), (logits,), back)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` stored as (in, out)."""
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)
