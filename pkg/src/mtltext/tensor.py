"""Dense float64 tensors with reverse-mode automatic differentiation.

A ``GradientTape`` records every primitive applied to tensors attached to
it. ``backward(tape, loss)`` replays the records once, in reverse order,
and returns d(loss)/d(param) for every parameter registered on the tape.
The tape is consumed by backward: a second call raises.

Tensors not attached to any tape behave as constants; running the same
forward code without a tape gives a plain (non-recording) evaluation.
All compute is float64 and every primitive checks its output for NaN/Inf.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .errors import ContractError, NumericError

_GELU_C = math.sqrt(2.0 / math.pi)


def _as_array(value) -> np.ndarray:
    # row-major float64; np.ascontiguousarray would promote 0-d to 1-d
    arr = np.asarray(value, dtype=np.float64, order="C")
    return arr if arr.flags["C_CONTIGUOUS"] else np.ascontiguousarray(arr)


class Tensor:
    """A dense array, optionally attached to a tape as graph node ``node``."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape: Optional["GradientTape"] = None, node: Optional[int] = None):
        self.data = _as_array(data)
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = "const" if self.tape is None else f"node {self.node}"
        return f"Tensor(shape={self.shape}, {tag})"

    # arithmetic sugar; plain numbers/arrays are wrapped as constants
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _wrap(other))


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class _Record:
    __slots__ = ("op", "out_node", "in_nodes", "vjp")

    def __init__(self, op: str, out_node: int, in_nodes, vjp: Callable):
        self.op = op
        self.out_node = out_node
        self.in_nodes = in_nodes  # node id or None per differentiable input
        self.vjp = vjp  # grad_out -> tuple of grads aligned with in_nodes


class GradientTape:
    """Ordered record of primitive applications plus registered parameters."""

    def __init__(self):
        self._records: list[_Record] = []
        self._num_nodes = 0
        self._params: dict[str, Tensor] = {}
        self._consumed = False

    def _new_node(self) -> int:
        node = self._num_nodes
        self._num_nodes += 1
        return node

    def parameter(self, name: str, value) -> Tensor:
        """Register a named leaf; backward reports its gradient."""
        if self._consumed:
            raise ContractError("tape already consumed by backward")
        if name in self._params:
            raise ContractError(f"parameter {name!r} registered twice")
        t = Tensor(value, tape=self, node=self._new_node())
        self._params[name] = t
        return t

    def parameters(self, values: dict) -> dict[str, Tensor]:
        """Register a whole name->array mapping; returns name->Tensor."""
        return {name: self.parameter(name, v) for name, v in values.items()}


def _check_finite(op: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced by primitive {op!r}")


def _record(op: str, inputs, out_data: np.ndarray, vjp: Callable) -> Tensor:
    """Common tail of every primitive: finiteness check + tape bookkeeping."""
    _check_finite(op, out_data)
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is not None and tape is not t.tape:
                raise ContractError(f"{op}: inputs recorded on different tapes")
            tape = t.tape
    if tape is None:
        return Tensor(out_data)
    if tape._consumed:
        raise ContractError(f"{op}: tape already consumed by backward")
    out = Tensor(out_data, tape=tape, node=tape._new_node())
    in_nodes = tuple(t.node if t.tape is not None else None for t in inputs)
    tape._records.append(_Record(op, out.node, in_nodes, vjp))
    return out


def _sum_to(grad: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data
    ash, bsh = a.shape, b.shape

    def vjp(g):
        return _sum_to(g, ash), _sum_to(g, bsh)

    return _record("add", (a, b), out, vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data
    ash, bsh = a.shape, b.shape

    def vjp(g):
        return _sum_to(g, ash), _sum_to(-g, bsh)

    return _record("sub", (a, b), out, vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data
    ad, bd = a.data, b.data

    def vjp(g):
        return _sum_to(g * bd, ad.shape), _sum_to(g * ad, bd.shape)

    return _record("mul", (a, b), out, vjp)


def neg(a: Tensor) -> Tensor:
    return _record("neg", (a,), -a.data, lambda g: (-g,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; both operands must have ndim >= 2 (batch dims allowed)."""
    if a.ndim < 2 or b.ndim < 2:
        raise ContractError("matmul requires operands with ndim >= 2")
    out = np.matmul(a.data, b.data)
    ad, bd = a.data, b.data

    def vjp(g):
        da = _sum_to(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        db = _sum_to(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return da, db

    return _record("matmul", (a, b), out, vjp)


def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape
    return _record("reshape", (a,), a.data.reshape(shape),
                   lambda g: (g.reshape(old),))


def transpose(a: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)
    return _record("transpose", (a,), np.transpose(a.data, axes),
                   lambda g: (np.transpose(g, inverse),))


def tensor_sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape, nd = a.shape, a.ndim

    def vjp(g):
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, tuple(ax % nd for ax in axes))
        return (np.broadcast_to(g, shape).copy(),)

    return _record("sum", (a,), out, vjp)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.size if axis is None else _axis_count(a.shape, axis)
    shape, nd = a.shape, a.ndim

    def vjp(g):
        if axis is not None and not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            g = np.expand_dims(g, tuple(ax % nd for ax in axes))
        return (np.broadcast_to(g / count, shape).copy(),)

    return _record("mean", (a,), out, vjp)


def _axis_count(shape, axis) -> int:
    axes = axis if isinstance(axis, tuple) else (axis,)
    n = 1
    for ax in axes:
        n *= shape[ax % len(shape)]
    return n


def log(a: Tensor) -> Tensor:
    ad = a.data
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(ad)
    return _record("log", (a,), out, lambda g: (g / ad,))


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return _record("exp", (a,), out, lambda g: (g * out,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _record("tanh", (a,), out, lambda g: (g * (1.0 - out * out),))


def gelu(a: Tensor) -> Tensor:
    """GELU, tanh approximation: 0.5*x*(1 + tanh(c*(x + 0.044715*x^3)))."""
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * (x + 0.044715 * x2 * x))
    out = 0.5 * x * (1.0 + t)

    def vjp(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x2)
        dx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
        return (g * dx,)

    return _record("gelu", (a,), out, vjp)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Row-stochastic softmax along ``axis``, computed with max-subtraction."""
    if a.size == 0:
        raise ContractError("softmax of an empty tensor")
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - dot),)

    return _record("softmax", (a,), out, vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize over the last axis: (x - mu)/sqrt(var + eps) * gamma + beta."""
    if eps <= 0:
        raise ContractError("layer_norm requires eps > 0")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    var = xd.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mu) * inv
    out = xhat * gamma.data + beta.data
    gd = gamma.data
    n = xd.shape[-1]
    lead = tuple(range(xd.ndim - 1))

    def vjp(g):
        dbeta = g.sum(axis=lead)
        dgamma = (g * xhat).sum(axis=lead)
        dxhat = g * gd
        dx = inv * (dxhat
                    - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / n)
        return dx, dgamma, dbeta

    return _record("layer_norm", (x, gamma, beta), out, vjp)


def gather(a: Tensor, ids) -> Tensor:
    """Rows of ``a`` (axis 0) at integer index array ``ids`` (any shape)."""
    idx = np.asarray(ids, dtype=np.intp)
    out = a.data[idx]
    shape = a.shape

    def vjp(g):
        da = np.zeros(shape, dtype=np.float64)
        np.add.at(da, idx, g)
        return (da,)

    return _record("gather", (a,), out, vjp)


def pick(a: Tensor, cols) -> Tensor:
    """out[i] = a[i, cols[i]] for a 2-D tensor."""
    if a.ndim != 2:
        raise ContractError("pick expects a 2-D tensor")
    col_idx = np.asarray(cols, dtype=np.intp)
    rows = np.arange(a.shape[0])
    out = a.data[rows, col_idx]
    shape = a.shape

    def vjp(g):
        da = np.zeros(shape, dtype=np.float64)
        np.add.at(da, (rows, col_idx), g)
        return (da,)

    return _record("pick", (a,), out, vjp)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability ``rate``, scale kept by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ContractError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(np.float64) / (1.0 - rate)
    return _record("dropout", (a,), a.data * keep, lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# backward
# ---------------------------------------------------------------------------

def backward(tape: GradientTape, loss: Tensor) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every parameter registered on the tape.

    Traverses the records exactly once, in reverse application order, then
    marks the tape consumed. Parameters the loss does not depend on map to
    zero arrays of the parameter's shape.
    """
    if tape._consumed:
        raise ContractError("tape already consumed by backward")
    if loss.tape is not tape:
        raise ContractError("loss was not recorded on this tape")
    if loss.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    tape._consumed = True

    grads: list[Optional[np.ndarray]] = [None] * tape._num_nodes
    grads[loss.node] = np.ones(loss.shape, dtype=np.float64)

    for rec in reversed(tape._records):
        g_out = grads[rec.out_node]
        if g_out is None:
            continue
        in_grads = rec.vjp(g_out)
        for node, g in zip(rec.in_nodes, in_grads):
            if node is None:
                continue
            _check_finite(rec.op, g)
            if grads[node] is None:
                grads[node] = g
            else:
                grads[node] = grads[node] + g

    out = {}
    for name, p in tape._params.items():
        g = grads[p.node]
        out[name] = np.zeros(p.shape, dtype=np.float64) if g is None else g
    return out
