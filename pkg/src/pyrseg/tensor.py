"""Reverse-mode autodiff over a recorded op tape.

Tensors wrap numpy arrays (float32 by default; float64 is used by the
finite-difference checker). While a Graph is active as a context manager,
every op that touches a requires_grad tensor appends one node to the tape.
backward(loss) replays the tape exactly once, in reverse recorded order,
summing gradients where a tensor fans out to several consumers.

Gradients land in .grad, which must be empty at backward time: call
zero_grad first. Re-running backward without zeroing raises instead of
silently accumulating, and a graph can only be walked once.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_DTYPE = np.float32

# Toggled by set_debug_checks: verifies op outputs are finite after each
# forward. Off by default, it doubles the cost of cheap ops.
_debug_checks = False

_active_graph: "Graph | None" = None


def set_debug_checks(enabled: bool) -> None:
    global _debug_checks
    _debug_checks = bool(enabled)


def active_graph() -> "Graph | None":
    return _active_graph


class Graph:
    """Op tape for one forward pass (define-by-run, single logical thread)."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.consumed = False

    def __enter__(self) -> "Graph":
        global _active_graph
        if _active_graph is not None:
            raise RuntimeError("a Graph is already active; graphs do not nest")
        _active_graph = self
        return self

    def __exit__(self, *exc) -> bool:
        global _active_graph
        _active_graph = None
        return False


class Node:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(
        self,
        inputs: tuple["Tensor", ...],
        output: "Tensor",
        backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
    ) -> None:
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tensor:
    """Dense N-d array plus gradient bookkeeping."""

    __slots__ = ("data", "requires_grad", "grad", "graph")

    def __init__(self, data, requires_grad: bool = False, dtype=None) -> None:
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.graph: Graph | None = None

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

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    __rmul__ = __mul__

    def scale(self, s: float) -> "Tensor":
        return mul(self, float(s))

    def sum(self, axis=None) -> "Tensor":
        return tsum(self, axis)

    def mean(self, axis=None) -> "Tensor":
        return tmean(self, axis)

    def __matmul__(self, other) -> "Tensor":
        return matmul(self, other)


def record_op(
    data: np.ndarray,
    inputs: tuple[Tensor, ...],
    backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]],
) -> Tensor:
    """Wrap an op result; append a tape node if recording and grads are needed."""
    if _debug_checks and not np.all(np.isfinite(data)):
        raise FloatingPointError("op produced non-finite values from finite inputs")
    g = _active_graph
    needs = g is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs, dtype=data.dtype)
    if needs:
        out.graph = g
        g.nodes.append(Node(inputs, out, backward_fn))
    return out


def backward(loss: Tensor) -> None:
    """Populate .grad for every requires_grad tensor reachable from loss."""
    if loss.size != 1:
        raise RuntimeError(f"backward requires a scalar root, got shape {loss.shape}")
    g = loss.graph
    if g is None:
        raise RuntimeError(
            "tensor is not attached to a graph; compute the loss inside `with Graph():` "
            "from requires_grad inputs"
        )
    if g.consumed:
        raise RuntimeError("backward already ran on this graph; record a new graph first")
    g.consumed = True

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {id(loss): loss}
    for node in reversed(g.nodes):
        gout = grads.pop(id(node.output), None)
        if gout is None:
            continue
        leaves.pop(id(node.output), None)
        _set_grad(node.output, gout)
        for t, gin in zip(node.inputs, node.backward_fn(gout)):
            if gin is None or not t.requires_grad:
                continue
            key = id(t)
            if key in grads:
                grads[key] = grads[key] + gin
            else:
                grads[key] = gin
                leaves[key] = t
    for key, garr in grads.items():
        _set_grad(leaves[key], garr)


def _set_grad(t: Tensor, garr: np.ndarray) -> None:
    if t.grad is not None:
        raise RuntimeError("tensor already holds a gradient; call zero_grad before backward")
    t.grad = np.ascontiguousarray(garr, dtype=t.data.dtype)


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# -- primitive ops ----------------------------------------------------------


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def _check_broadcast(a: tuple[int, ...], b: tuple[int, ...]) -> None:
    try:
        np.broadcast_shapes(a, b)
    except ValueError:
        raise ValueError(f"shape mismatch: {a} vs {b}") from None


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, like=a)
    _check_broadcast(a.shape, b.shape)
    data = a.data + b.data

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record_op(data, (a, b), backward_fn)


def mul(a: Tensor, b) -> Tensor:
    if isinstance(b, (int, float, np.floating)):
        s = float(b)
        return record_op(a.data * s, (a,), lambda g: (g * s,))
    _check_broadcast(a.shape, b.shape)
    data = a.data * b.data

    def backward_fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return record_op(data, (a, b), backward_fn)


def tsum(a: Tensor, axis=None) -> Tensor:
    data = a.data.sum(axis=axis)

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gx = np.expand_dims(g, axis)
        return (np.broadcast_to(gx, a.shape).copy(),)

    return record_op(np.asarray(data), (a,), backward_fn)


def tmean(a: Tensor, axis=None) -> Tensor:
    if axis is None:
        count = a.size
    else:
        count = int(np.prod([a.shape[ax] for ax in np.atleast_1d(axis)]))
    data = a.data.mean(axis=axis)

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.shape).copy(),)
        gx = np.expand_dims(g / count, axis)
        return (np.broadcast_to(gx, a.shape).copy(),)

    return record_op(np.asarray(data), (a,), backward_fn)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    data = a.data @ b.data

    def backward_fn(g):
        return g @ b.data.T, a.data.T @ g

    return record_op(data, (a, b), backward_fn)


def finite_diff_check(f, xs: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Max relative error between backward() and central differences.

    Runs f on float64 copies of xs: one recorded pass for analytic grads,
    then 2 unrecorded evaluations per input element. Relative error per
    element is |a-n| / max(|a|, |n|, 1e-8).
    """
    xs64 = [Tensor(x.data.astype(np.float64), requires_grad=True) for x in xs]
    with Graph():
        loss = f(*xs64)
    if loss.size != 1:
        raise RuntimeError(f"finite_diff_check needs a scalar objective, got shape {loss.shape}")
    backward(loss)

    worst = 0.0
    for x in xs64:
        analytic = x.grad.reshape(-1)
        flat = x.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f(*xs64).data)
            flat[i] = orig - eps
            fm = float(f(*xs64).data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * eps)
            a = float(analytic[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
