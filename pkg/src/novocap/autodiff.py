"""Minimal dense-tensor autodiff with a numpy backend.

Every trainable computation in this package is expressed through the ops
here, so analytic gradients can always be cross-checked against central
finite differences (see finite_diff_check). Design choices:

- float64 everywhere: models are tiny, precision buys tight grad checks.
- define-by-run: each op returns a fresh Tensor holding its parents and a
  backward closure; the graph is rebuilt on every training step.
- binary ops require exactly equal shapes (no broadcasting); python
  scalars are accepted as multiplicative/additive constants.
- log clamps its input at LOG_EPS below so losses stay finite.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import DimensionError

LOG_EPS = 1e-12

_grad_enabled = True


class no_grad:
    """Context manager that skips backward-closure construction."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return add(self, neg(other))

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def sum(self) -> "Tensor":
        return tsum(self)

    def backward(self) -> None:
        """Reverse-mode pass from a scalar; accumulates into .grad of every
        reachable tensor with requires_grad. Each node is visited once."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")
        order = topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def topo_order(root: Tensor) -> list[Tensor]:
    """Topological order of the graph below root (parents before consumers).

    Iterative so deep recurrent chains cannot hit the recursion limit.
    """
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
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def _result(data: np.ndarray, parents: tuple[Tensor, ...],
            backward: Callable[[np.ndarray], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- elementwise ------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("add", a, b)

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return _result(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _result(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, -g)

    return _result(-a.data, (a,), backward)


def scale(a: Tensor, s: float) -> Tensor:
    def backward(g):
        _accum(a, g * s)

    return _result(a.data * s, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accum(a, g * y * (1.0 - y))

    return _result(y, (a,), backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def backward(g):
        _accum(a, g * (1.0 - y * y))

    return _result(y, (a,), backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def backward(g):
        _accum(a, g * mask)

    return _result(a.data * mask, (a,), backward)


def log(a: Tensor) -> Tensor:
    """Natural log with the input clamped at LOG_EPS, so log of a vanishing
    probability stays finite. The clamped region has zero gradient."""
    clamped = np.maximum(a.data, LOG_EPS)
    mask = a.data > LOG_EPS

    def backward(g):
        _accum(a, g * mask / clamped)

    return _result(np.log(clamped), (a,), backward)


def clamp(a: Tensor, lo: float | None = None, hi: float | None = None) -> Tensor:
    y = np.clip(a.data, lo, hi)
    mask = np.ones_like(a.data)
    if lo is not None:
        mask *= a.data > lo
    if hi is not None:
        mask *= a.data < hi

    def backward(g):
        _accum(a, g * mask)

    return _result(y, (a,), backward)


# -- reductions / structure -------------------------------------------------

def tsum(a: Tensor) -> Tensor:
    def backward(g):
        _accum(a, np.full_like(a.data, float(g)))

    return _result(np.asarray(a.data.sum()), (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix/vector product for 1-D and 2-D operands, no broadcasting."""
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise DimensionError(f"matmul: only 1-D/2-D operands, got {a.shape} and {b.shape}")
    inner_a = a.shape[-1]
    inner_b = b.shape[0]
    if inner_a != inner_b:
        raise DimensionError(f"matmul: inner dimensions differ for {a.shape} x {b.shape}")

    def backward(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            _accum(a, np.outer(g, b.data))
            _accum(b, a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 2:
            _accum(a, b.data @ g)
            _accum(b, np.outer(a.data, g))
        else:  # dot product of two vectors
            _accum(a, g * b.data)
            _accum(b, g * a.data)

    return _result(a.data @ b.data, (a, b), backward)


def softmax(a: Tensor) -> Tensor:
    """Stable softmax of a 1-D tensor (max subtracted before exp)."""
    if a.data.ndim != 1 or a.data.size == 0:
        raise ValueError(f"softmax expects a non-empty vector, got shape {a.shape}")
    shifted = a.data - a.data.max()
    e = np.exp(shifted)
    y = e / e.sum()

    def backward(g):
        _accum(a, y * (g - np.dot(g, y)))

    return _result(y, (a,), backward)


def pick(a: Tensor, index: int) -> Tensor:
    """Select one element of a vector as a scalar."""
    if a.data.ndim != 1:
        raise DimensionError(f"pick expects a vector, got shape {a.shape}")
    if not 0 <= index < a.data.size:
        raise IndexError(f"pick index {index} out of range for size {a.data.size}")

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[index] += float(g)

    return _result(np.asarray(a.data[index]), (a,), backward)


def row(m: Tensor, index: int) -> Tensor:
    """Select one row of a matrix as a vector."""
    if m.data.ndim != 2:
        raise DimensionError(f"row expects a matrix, got shape {m.shape}")
    if not 0 <= index < m.shape[0]:
        raise IndexError(f"row index {index} out of range for {m.shape[0]} rows")

    def backward(g):
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.data)
            m.grad[index] += g

    return _result(m.data[index].copy(), (m,), backward)


def slice1d(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice of a vector."""
    if a.data.ndim != 1:
        raise DimensionError(f"slice1d expects a vector, got shape {a.shape}")

    def backward(g):
        if a.requires_grad:
            if a.grad is None:
                a.grad = np.zeros_like(a.data)
            a.grad[start:stop] += g

    return _result(a.data[start:stop].copy(), (a,), backward)


# -- gradient checking ------------------------------------------------------

def finite_diff_check(f: Callable[[Tensor], Tensor], p: Tensor, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    f must deterministically map the parameter tensor p to a scalar Tensor.
    Error per coordinate is |analytic - numeric| / max(1, |analytic|).
    """
    p.grad = None
    out = f(p)
    out.backward()
    analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
    p.grad = None

    worst = 0.0
    flat = p.data.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        with no_grad():
            fp = float(f(p).data)
        flat[i] = orig - h
        with no_grad():
            fm = float(f(p).data)
        flat[i] = orig
        numeric = (fp - fm) / (2.0 * h)
        a = analytic.reshape(-1)[i]
        err = abs(a - numeric) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst


def parameter(data, rng: np.random.Generator | None = None,
              low: float = -0.08, high: float = 0.08) -> Tensor:
    """Trainable tensor; if data is a shape tuple, fill uniformly from rng."""
    if isinstance(data, tuple):
        assert rng is not None
        data = rng.uniform(low, high, size=data)
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def global_grad_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return float(np.sqrt(total))
