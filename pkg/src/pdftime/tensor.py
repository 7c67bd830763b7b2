"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array. Operations on tensors that require
gradients record their inputs and a backward closure; :func:`backward` walks
the recorded graph in reverse topological order (the tape) and accumulates
``d loss / d leaf`` into ``leaf.grad``.

Leaf gradients always accumulate in float64, whatever the storage dtype.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "NumericError",
    "as_tensor",
    "backward",
    "no_grad",
    "is_grad_enabled",
    "tape",
]

_GRAD_ENABLED = True
CHECK_NUMERICS = True


class ShapeError(ValueError):
    """Operand shapes do not conform for an operation."""

    def __init__(self, op: str, *shapes, detail: str = ""):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        msg = f"{op}: incompatible shapes " + " and ".join(str(s) for s in self.shapes)
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NumericError(FloatingPointError):
    """An operation produced NaN or Inf."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"{op}: non-finite values in output"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


def _check_finite(op: str, arr: np.ndarray) -> None:
    # A sum is NaN/inf whenever any element is; only then pay for the full scan
    # (the sum alone can overflow on finite data).
    if not CHECK_NUMERICS:
        return
    with np.errstate(over="ignore", invalid="ignore"):
        total = np.sum(arr)
    if not np.isfinite(total) and not np.isfinite(arr).all():
        raise NumericError(op)


def unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """An n-d float array that can take part in reverse-mode differentiation.

    Attributes:
        data: the underlying numpy array.
        requires_grad: whether gradients flow to (or through) this tensor.
        grad: float64 gradient of the last :func:`backward` call, leaves only.
        op: name of the operation that produced this tensor ("" for leaves).
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.op = ""
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def _from_op(
        cls,
        data: np.ndarray,
        parents: Sequence["Tensor"],
        backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
        op: str,
    ) -> "Tensor":
        _check_finite(op, data)
        out = cls(data)
        out.op = op
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward_fn
        return out

    def _wrap(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- basic properties -----------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def __float__(self) -> float:
        return self.item()

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def astype(self, dtype) -> "Tensor":
        src = self
        out_dtype = np.dtype(dtype)

        def bw(g):
            return (g.astype(src.data.dtype, copy=False),)

        return Tensor._from_op(self.data.astype(out_dtype), (self,), bw, "astype")

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # -- element-wise arithmetic ----------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other
        try:
            data = a.data + b.data
        except ValueError:
            raise ShapeError("add", a.shape, b.shape) from None

        def bw(g):
            return (
                unbroadcast(g, a.shape) if a.requires_grad else None,
                unbroadcast(g, b.shape) if b.requires_grad else None,
            )

        return Tensor._from_op(data, (a, b), bw, "add")

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other
        try:
            data = a.data - b.data
        except ValueError:
            raise ShapeError("sub", a.shape, b.shape) from None

        def bw(g):
            return (
                unbroadcast(g, a.shape) if a.requires_grad else None,
                unbroadcast(-g, b.shape) if b.requires_grad else None,
            )

        return Tensor._from_op(data, (a, b), bw, "sub")

    def __rsub__(self, other) -> "Tensor":
        return self._wrap(other) - self

    def __mul__(self, other) -> "Tensor":
        if not isinstance(other, Tensor) and np.ndim(other) == 0:
            return self.scale(other)
        other = self._wrap(other)
        a, b = self, other
        try:
            data = a.data * b.data
        except ValueError:
            raise ShapeError("mul", a.shape, b.shape) from None

        def bw(g):
            return (
                unbroadcast(g * b.data, a.shape) if a.requires_grad else None,
                unbroadcast(g * a.data, b.shape) if b.requires_grad else None,
            )

        return Tensor._from_op(data, (a, b), bw, "mul")

    __rmul__ = __mul__

    def scale(self, c: float) -> "Tensor":
        c = float(c)
        data = self.data * self.data.dtype.type(c)
        return Tensor._from_op(data, (self,), lambda g: (g * c,), "scale")

    def __neg__(self) -> "Tensor":
        return self.scale(-1.0)

    def __truediv__(self, other) -> "Tensor":
        if not isinstance(other, Tensor) and np.ndim(other) == 0:
            return self.scale(1.0 / float(other))
        other = self._wrap(other)
        a, b = self, other
        try:
            data = a.data / b.data
        except ValueError:
            raise ShapeError("div", a.shape, b.shape) from None

        def bw(g):
            ga = unbroadcast(g / b.data, a.shape) if a.requires_grad else None
            gb = unbroadcast(-g * data / b.data, b.shape) if b.requires_grad else None
            return ga, gb

        return Tensor._from_op(data, (a, b), bw, "div")

    def __rtruediv__(self, other) -> "Tensor":
        return self._wrap(other) / self

    def __pow__(self, p: float) -> "Tensor":
        p = float(p)
        x = self.data
        data = x**p

        def bw(g):
            return (g * p * x ** (p - 1.0),)

        return Tensor._from_op(data, (self,), bw, "pow")

    def __matmul__(self, other) -> "Tensor":
        other = self._wrap(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
            raise ShapeError("matmul", a.shape, b.shape)
        try:
            data = a.data @ b.data
        except ValueError:
            raise ShapeError("matmul", a.shape, b.shape) from None

        def bw(g):
            ga = gb = None
            if a.requires_grad:
                ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
            if b.requires_grad:
                gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
            return ga, gb

        return Tensor._from_op(data, (a, b), bw, "matmul")

    def __rmatmul__(self, other) -> "Tensor":
        return self._wrap(other) @ self

    # -- unary maps -------------------------------------------------------------

    def exp(self) -> "Tensor":
        data = np.exp(self.data)
        return Tensor._from_op(data, (self,), lambda g: (g * data,), "exp")

    def log(self) -> "Tensor":
        x = self.data
        with np.errstate(divide="ignore", invalid="ignore"):
            data = np.log(x)
        return Tensor._from_op(data, (self,), lambda g: (g / x,), "log")

    def sqrt(self) -> "Tensor":
        data = np.sqrt(self.data)
        return Tensor._from_op(data, (self,), lambda g: (g * 0.5 / data,), "sqrt")

    # -- reductions -------------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.shape
        data = np.asarray(self.data.sum(axis=axis, keepdims=keepdims))

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._from_op(data, (self,), bw, "sum")

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.size if axis is None else int(np.prod([self.shape[a] for a in np.atleast_1d(axis)]))
        return self.sum(axis=axis, keepdims=keepdims).scale(1.0 / n)

    def max(self, axis: int, keepdims: bool = False) -> "Tensor":
        x = self.data
        idx = np.expand_dims(np.argmax(x, axis=axis), axis)
        data = np.take_along_axis(x, idx, axis=axis)
        if not keepdims:
            data = np.squeeze(data, axis=axis)

        def bw(g):
            gx = np.zeros(x.shape, dtype=g.dtype)
            if not keepdims:
                g = np.expand_dims(g, axis)
            np.put_along_axis(gx, idx, g, axis=axis)
            return (gx,)

        return Tensor._from_op(data, (self,), bw, "max")

    # -- shape manipulation -----------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape
        try:
            data = self.data.reshape(shape)
        except ValueError:
            raise ShapeError("reshape", src, shape) from None
        return Tensor._from_op(data, (self,), lambda g: (g.reshape(src),), "reshape")

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        data = self.data.transpose(axes)
        return Tensor._from_op(data, (self,), lambda g: (g.transpose(inv),), "transpose")

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def __getitem__(self, index) -> "Tensor":
        shape = self.shape
        data = self.data[index]

        def bw(g):
            gx = np.zeros(shape, dtype=g.dtype)
            np.add.at(gx, index, g)
            return (gx,)

        return Tensor._from_op(np.array(data), (self,), bw, "getitem")


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x if dtype is None or x.dtype == dtype else Tensor(x.data.astype(dtype))
    return Tensor(x, dtype=dtype)


def tape(loss: Tensor) -> list[Tensor]:
    """Recorded operations reachable from ``loss`` in reverse execution order.

    Every node appears exactly once; a node is listed before all of its
    parents, which is the order reverse accumulation needs.
    """
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def backward(loss: Tensor, grad: np.ndarray | None = None) -> None:
    """Populate ``.grad`` on every requires-grad leaf reachable from ``loss``."""
    if loss.size != 1 and grad is None:
        raise ShapeError("backward", loss.shape, (), detail="loss must be a scalar")
    if not loss.requires_grad:
        return
    seed = np.ones(loss.shape, dtype=loss.dtype) if grad is None else np.asarray(grad)
    pending: dict[int, np.ndarray] = {id(loss): seed}
    for node in tape(loss):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            g64 = np.asarray(g, dtype=np.float64)
            node.grad = g64.copy() if node.grad is None else node.grad + g64
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + pg
            else:
                pending[key] = pg

