"""Dense float64 matrices with a small reverse-mode gradient tape.

Every value is a 2-D ``numpy.ndarray`` of dtype float64.  A :class:`Node`
wraps one value together with the operands that produced it and the local
adjoint rule for that operation.  :func:`backward` walks the record once in
reverse topological order and returns the gradient of a scalar loss with
respect to every named leaf that requires a gradient.

Only the operations needed by the clustering objective are provided; there is
no general broadcasting (the one exception being :func:`scalar_mul`, which
scales a matrix by a 1x1 node).
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .errors import ContractError, DegenerateRowError, NumericalError, ShapeError

EPSILON_NORM = 1e-12

Adjoint = Callable[[np.ndarray], tuple]


def as_matrix(value) -> np.ndarray:
    """Coerce ``value`` to a finite 2-D float64 array (scalars become 1x1)."""
    arr = np.array(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"expected a matrix, got an array of rank {arr.ndim}")
    return arr


def _check_finite(value: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite entries produced by {op}")


class Node:
    """One value in the computation record."""

    __slots__ = ("value", "parents", "op", "adjoint", "requires_grad", "name", "grad")

    def __init__(
        self,
        value,
        parents: tuple["Node", ...] = (),
        op: str = "leaf",
        adjoint: Adjoint | None = None,
        requires_grad: bool = False,
        name: str | None = None,
    ):
        self.value = as_matrix(value)
        _check_finite(self.value, op)
        self.parents = parents
        self.op = op
        self.adjoint = adjoint
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Node({self.op}{label}, shape={self.shape})"

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return subtract(self, _wrap(other))

    def __rsub__(self, other):
        return subtract(_wrap(other), self)

    def __neg__(self):
        return negate(self)

    def __mul__(self, other):
        if np.isscalar(other):
            return scale(self, float(other))
        return hadamard(self, _wrap(other))

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, _wrap(other))

    @property
    def T(self):
        return transpose(self)


def _wrap(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def parameter(value, name: str) -> Node:
    """A named leaf whose gradient :func:`backward` reports."""
    return Node(value, requires_grad=True, name=name)


def constant(value) -> Node:
    return Node(value)


def _require_same_shape(a: Node, b: Node, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a: Node, b: Node) -> Node:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    av, bv = a.value, b.value
    return Node(av @ bv, (a, b), "matmul", lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Node) -> Node:
    return Node(a.value.T, (a,), "transpose", lambda g: (g.T,))


def add(a: Node, b: Node) -> Node:
    _require_same_shape(a, b, "add")
    return Node(a.value + b.value, (a, b), "add", lambda g: (g, g))


def subtract(a: Node, b: Node) -> Node:
    _require_same_shape(a, b, "subtract")
    return Node(a.value - b.value, (a, b), "subtract", lambda g: (g, -g))


def negate(a: Node) -> Node:
    return Node(-a.value, (a,), "negate", lambda g: (-g,))


def scale(a: Node, c: float) -> Node:
    return Node(c * a.value, (a,), "scale", lambda g: (c * g,))


def hadamard(a: Node, b: Node) -> Node:
    _require_same_shape(a, b, "hadamard")
    av, bv = a.value, b.value
    return Node(av * bv, (a, b), "hadamard", lambda g: (g * bv, g * av))


def mean_of_two(a: Node, b: Node) -> Node:
    _require_same_shape(a, b, "mean_of_two")
    return Node(0.5 * (a.value + b.value), (a, b), "mean_of_two", lambda g: (0.5 * g, 0.5 * g))


def exp(a: Node) -> Node:
    with np.errstate(over="ignore"):
        out = np.exp(a.value)
    return Node(out, (a,), "exp", lambda g: (g * out,))


def log(a: Node) -> Node:
    if np.any(a.value <= 0):
        raise NumericalError("log of a non-positive entry")
    av = a.value
    return Node(np.log(av), (a,), "log", lambda g: (g / av,))


def power(a: Node, p: float) -> Node:
    av = a.value
    if p != int(p) and np.any(av < 0):
        raise NumericalError("fractional power of a negative entry")
    return Node(av**p, (a,), "power", lambda g: (g * p * av ** (p - 1),))


def sigmoid(a: Node) -> Node:
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Node(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


def scalar_mul(s: Node, a: Node) -> Node:
    """Scale matrix ``a`` by the 1x1 node ``s``."""
    if s.shape != (1, 1):
        raise ShapeError(f"scalar_mul: expected a 1x1 scale, got {s.shape}")
    sv, av = s.value[0, 0], a.value
    return Node(sv * av, (s, a), "scalar_mul", lambda g: (np.array([[np.sum(g * av)]]), sv * g))


def row_sum(a: Node) -> Node:
    n, m = a.shape
    return Node(a.value.sum(axis=1, keepdims=True), (a,), "row_sum", lambda g: (np.broadcast_to(g, (n, m)).copy(),))


def diagonal(a: Node) -> Node:
    """Main diagonal of a square matrix as an Nx1 column."""
    n, m = a.shape
    if n != m:
        raise ShapeError(f"diagonal: matrix {a.shape} is not square")

    def adjoint(g):
        out = np.zeros((n, n))
        out[np.diag_indices(n)] = g[:, 0]
        return (out,)

    return Node(np.diag(a.value).reshape(n, 1), (a,), "diagonal", adjoint)


def total_sum(a: Node) -> Node:
    shape = a.shape
    return Node(np.array([[a.value.sum()]]), (a,), "total_sum", lambda g: (np.full(shape, g[0, 0]),))


def mean(a: Node) -> Node:
    return scale(total_sum(a), 1.0 / a.value.size)


def row_l2_normalize(a: Node, eps: float = EPSILON_NORM) -> Node:
    """Divide every row by its Euclidean norm.

    Raises DegenerateRowError for the first row whose norm is below ``eps``.
    """
    av = a.value
    norms = np.sqrt(np.sum(av * av, axis=1, keepdims=True))
    bad = np.flatnonzero(norms[:, 0] < eps)
    if bad.size:
        raise DegenerateRowError(int(bad[0]), float(norms[bad[0], 0]))
    out = av / norms

    def adjoint(g):
        # d(x/|x|) = (g - y (y.g)) / |x|
        return ((g - out * np.sum(out * g, axis=1, keepdims=True)) / norms,)

    return Node(out, (a,), "row_l2_normalize", adjoint)


def minmax_normalize(a) -> np.ndarray:
    """Global min-max rescaling to [0, 1]; a constant matrix maps to zeros."""
    av = as_matrix(a)
    if av.size == 0:
        raise ShapeError("minmax_normalize: empty matrix")
    lo, hi = av.min(), av.max()
    if hi == lo:
        return np.zeros_like(av)
    return (av - lo) / (hi - lo)


def _topological_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Node) -> dict[str, np.ndarray]:
    """Accumulate d(loss)/d(leaf) for every leaf that requires a gradient.

    Leaves receive their gradient in ``.grad``; the returned mapping holds the
    named ones.  Unnamed leaves are reachable only through ``.grad``.
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a 1x1 loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    named: dict[str, np.ndarray] = {}
    for node in reversed(_topological_order(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node.parents:
            node.grad = g
            if node.name is not None:
                named[node.name] = g
            continue
        for parent, pg in zip(node.parents, node.adjoint(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.array(pg, dtype=np.float64)
    return named


def leaves(root: Node) -> Iterable[Node]:
    """Named leaves reachable from ``root`` that require a gradient."""
    return [n for n in _topological_order(root) if not n.parents and n.name is not None]
