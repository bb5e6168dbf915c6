"""Dense n-dimensional arrays with reverse-mode gradients.

Tensors wrap a numpy array. Every operation on tensors records its parents
and a closure that maps the output gradient to input gradients; calling
:meth:`Tensor.backward` on a scalar walks that graph once.

Broadcasting is deliberately unsupported: binary operations need equal
shapes, except for Python scalars.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "ShapeError",
    "NonFiniteError",
    "GraphError",
    "precision",
    "get_default_dtype",
    "no_grad",
    "is_grad_enabled",
    "matmul",
    "elementwise",
    "sgd_step",
    "zero_grad",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf from its inputs."""


class GraphError(RuntimeError):
    """Invalid use of the recorded computation graph."""


_state = threading.local()


def get_default_dtype() -> np.dtype:
    return getattr(_state, "dtype", np.dtype(np.float32))


def is_grad_enabled() -> bool:
    return getattr(_state, "grad", True)


@contextmanager
def precision(dtype):
    """Temporarily change the dtype used for new tensors (e.g. ``np.float64``)."""
    prev = get_default_dtype()
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = prev


@contextmanager
def no_grad():
    prev = is_grad_enabled()
    _state.grad = False
    try:
        yield
    finally:
        _state.grad = prev


BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    """An array plus the bookkeeping needed for backpropagation."""

    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = np.array(data, dtype=dtype or get_default_dtype())
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._consumed = False
        self._op = "leaf"

    # construction of op outputs -------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{op}: non-finite value in output")
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out._consumed = False
        out._op = op
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # basic properties ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
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

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op}, requires_grad={self.requires_grad})"

    def __len__(self):
        return self.data.shape[0]

    # arithmetic ------------------------------------------------------------------

    def __add__(self, other):
        return elementwise("add", self, other)

    def __radd__(self, other):
        return elementwise("add", self, other)

    def __sub__(self, other):
        return elementwise("sub", self, other)

    def __rsub__(self, other):
        return elementwise("rsub", self, other)

    def __mul__(self, other):
        return elementwise("mul", self, other)

    def __rmul__(self, other):
        return elementwise("mul", self, other)

    def __neg__(self):
        return elementwise("mul", self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sigmoid(self):
        return elementwise("sigmoid", self)

    def tanh(self):
        return elementwise("tanh", self)

    def relu(self):
        return elementwise("relu", self)

    # shape manipulation ----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        src = self.shape
        try:
            data = self.data.reshape(shape)
        except ValueError as exc:
            raise ShapeError(f"reshape: cannot view {src} as {shape}") from exc
        return Tensor._result(data, (self,), lambda g: (g.reshape(src),), "reshape")

    def flatten_from(self, axis: int = 1) -> "Tensor":
        return self.reshape(self.shape[:axis] + (-1,))

    def transpose(self, *axes) -> "Tensor":
        axes = axes or tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        return Tensor._result(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inverse),), "transpose"
        )

    def __getitem__(self, index) -> "Tensor":
        src_shape, dtype = self.shape, self.data.dtype

        def backward(g):
            full = np.zeros(src_shape, dtype=dtype)
            full[index] = g
            return (full,)

        return Tensor._result(np.array(self.data[index]), (self,), backward, "getitem")

    # reductions ------------------------------------------------------------------

    def sum(self) -> "Tensor":
        shape, dtype = self.shape, self.data.dtype
        return Tensor._result(
            np.array(self.data.sum(), dtype=dtype),
            (self,),
            lambda g: (np.full(shape, g, dtype=dtype),),
            "sum",
        )

    def mean(self) -> "Tensor":
        shape, dtype, n = self.shape, self.data.dtype, self.data.size
        return Tensor._result(
            np.array(self.data.mean(), dtype=dtype),
            (self,),
            lambda g: (np.full(shape, g / n, dtype=dtype),),
            "mean",
        )

    # autograd ----------------------------------------------------------------------

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Populate ``.grad`` of every reachable leaf that requires it.

        Frozen parameters are skipped entirely (their gradient reads as
        zero). A graph can be walked only once; re-run the forward pass to backprop
        again. Gradients accumulate into existing ``.grad`` buffers.
        """
        if self.data.size != 1:
            raise GraphError(f"backward needs a scalar, got shape {self.shape}")
        if self._consumed:
            raise GraphError("backward already called on this graph; rebuild it with a new forward pass")

        order = _topological(self)
        pending: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if not node._parents:
                if node.requires_grad and g is not None:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            if g is None or node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pending[key] + pg if key in pending else pg
        for node in order:
            if node._parents or node is self:
                node._consumed = True
                node._backward = None


def _topological(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


class Parameter(Tensor):
    """A named, optionally frozen, leaf tensor owned by a layer.

    A frozen parameter never takes part in backpropagation and always
    reports an all-zero gradient.
    """

    def __init__(self, data, name: str = "", trainable: bool = True, dtype=None):
        super().__init__(data, requires_grad=trainable, dtype=dtype)
        self.name = name
        self._op = "param"

    @property
    def grad(self):
        if not self.requires_grad:
            return np.zeros_like(self.data)
        return self._grad

    @grad.setter
    def grad(self, value):
        self._grad = value

    @property
    def trainable(self) -> bool:
        return self.requires_grad

    @trainable.setter
    def trainable(self, value: bool):
        self.requires_grad = bool(value)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, trainable={self.trainable})"


def _as_operand(x, like: Tensor):
    if isinstance(x, Tensor):
        return x
    if np.isscalar(x):
        return float(x)
    raise TypeError(f"unsupported operand type {type(x).__name__}; wrap arrays in Tensor")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def elementwise(op: str, a, b=None) -> Tensor:
    """Apply ``op`` in {add, sub, rsub, mul, sigmoid, tanh, relu} elementwise.

    Binary ops take two equal-shape tensors or a tensor and a Python scalar.
    """
    if not isinstance(a, Tensor):
        raise TypeError("first operand must be a Tensor")
    x = a.data
    if op in ("sigmoid", "tanh", "relu"):
        if op == "sigmoid":
            y = _sigmoid(x)
            back = lambda g: (g * y * (1 - y),)
        elif op == "tanh":
            y = np.tanh(x)
            back = lambda g: (g * (1 - y * y),)
        else:
            mask = x > 0
            y = np.where(mask, x, np.zeros_like(x))
            back = lambda g: (g * mask,)
        return Tensor._result(y, (a,), back, op)

    other = _as_operand(b, a)
    if isinstance(other, Tensor):
        if other.shape != a.shape:
            raise ShapeError(f"{op}: shape mismatch {a.shape} vs {other.shape}")
        yv = other.data
        if op == "add":
            out, back = x + yv, lambda g: (g, g)
        elif op == "sub":
            out, back = x - yv, lambda g: (g, -g)
        elif op == "rsub":
            out, back = yv - x, lambda g: (-g, g)
        elif op == "mul":
            out, back = x * yv, lambda g: (g * yv, g * x)
        else:
            raise ValueError(f"unknown elementwise op {op!r}")
        return Tensor._result(out, (a, other), back, op)

    s = x.dtype.type(other)
    if op == "add":
        out, back = x + s, lambda g: (g,)
    elif op == "sub":
        out, back = x - s, lambda g: (g,)
    elif op == "rsub":
        out, back = s - x, lambda g: (-g,)
    elif op == "mul":
        out, back = x * s, lambda g: (g * s,)
    else:
        raise ValueError(f"unknown elementwise op {op!r}")
    return Tensor._result(out, (a,), back, op)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product ``a @ b``."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shape mismatch {a.shape} vs {b.shape}")
    x, w = a.data, b.data
    return Tensor._result(x @ w, (a, b), lambda g: (g @ w.T, x.T @ g), "matmul")


def zero_grad(params: Iterable[Tensor]):
    for p in params:
        p.grad = None


def sgd_step(params: Iterable[Parameter], lr: float):
    """Plain SGD: ``value -= lr * grad`` for trainable params, then clear grads."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p in params:
        if p.trainable and p.grad is not None:
            p.data -= p.data.dtype.type(lr) * p.grad.astype(p.data.dtype, copy=False)
        p.grad = None
