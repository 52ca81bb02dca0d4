"""Dense float64 tensors with reverse-mode differentiation.

Every differentiable op creates its output through :func:`record`, which
stamps the node with a monotonically increasing id. Ids give a valid
topological order for free, so :func:`backward` only has to collect the
ancestors of the root and walk them by decreasing id.
"""
from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class StateError(RuntimeError):
    """An object is not in the state an operation requires."""


class NonFiniteError(FloatingPointError):
    """A forward or backward pass produced NaN or Inf."""


_ids = itertools.count(1)
_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


def _active_tapes() -> list:
    if not hasattr(_state, "tapes"):
        _state.tapes = []
    return _state.tapes


@contextmanager
def no_grad():
    """Disable recording; ops inside return constant tensors."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward", "_id")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._id = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True).reshape(self.data.shape)
        else:
            self.grad += g

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    # operator sugar; implementations live in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        if np.isscalar(other):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        from . import ops
        return ops.scale(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        return ops.transpose(self, axes or None)

    @property
    def T(self):
        return self.transpose()

    def sum(self):
        from . import ops
        return ops.sum_all(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def record(out_data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    """Wrap ``out_data`` and, if any parent needs a gradient, attach ``backward_fn``.

    ``backward_fn`` receives the upstream gradient and must call
    ``parent.accumulate`` for each parent with ``requires_grad``.
    """
    out = Tensor(out_data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
        out._id = next(_ids)
        for tape in _active_tapes():
            tape.nodes.append(out)
    return out


class Tape:
    """Records every differentiable op created while the context is open.

    Only needed for inspection; :func:`backward` works without a tape.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self) -> "Tape":
        _active_tapes().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tapes().remove(self)

    def __len__(self) -> int:
        return len(self.nodes)

    def depends_on(self, tensors: Iterable[Tensor]) -> bool:
        """True if any recorded op consumed one of ``tensors`` directly."""
        wanted = {id(t) for t in tensors}
        return any(id(p) in wanted for node in self.nodes for p in node._parents)

    def backward(self, root: Tensor, grad: np.ndarray | None = None) -> None:
        backward(root, grad)


def _ancestors(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    order: list[Tensor] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen or node._backward is None:
            continue
        seen.add(id(node))
        order.append(node)
        stack.extend(node._parents)
    order.sort(key=lambda t: t._id, reverse=True)
    return order


def backward(root: Tensor, grad: np.ndarray | None = None, check_finite: bool = True) -> None:
    """Accumulate d(root)/d(leaf) into ``leaf.grad`` for every leaf requiring grad."""
    if not root.requires_grad:
        raise StateError("root tensor does not require grad")
    if grad is None:
        if root.data.size != 1:
            raise DimensionError("implicit seed gradient needs a scalar root")
        grad = np.ones_like(root.data)
    nodes = _ancestors(root)
    # intermediate grads are scratch space for this pass only
    for node in nodes:
        node.grad = None
    root.accumulate(np.asarray(grad, dtype=np.float64))
    for node in nodes:
        if node.grad is None:
            continue
        node._backward(node.grad)
        if node is not root:
            node.grad = None
    if check_finite:
        for leaf in _leaves(root):
            if leaf.grad is not None and not np.all(np.isfinite(leaf.grad)):
                raise NonFiniteError(f"non-finite gradient in {leaf!r}")


def _leaves(root: Tensor) -> list[Tensor]:
    seen: set[int] = set()
    out = []
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if node._backward is None:
            if node.requires_grad:
                out.append(node)
        else:
            stack.extend(node._parents)
    return out
