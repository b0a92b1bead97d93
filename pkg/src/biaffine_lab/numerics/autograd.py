"""A small reverse-mode tape over numpy arrays.

Every op returns a :class:`Var` that remembers its parents together with a
closure mapping the upstream gradient to the gradient of each parent.
:meth:`Var.backward` walks the graph in reverse topological order.

All values are float64. Gradients only flow into nodes whose
``requires_grad`` flag is set (parameters, and anything computed from them).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

NEG_INF = -1e30


class Var:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "name")

    def __init__(self, value, requires_grad: bool = False, parents=(), name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[tuple[Var, Callable[[np.ndarray], np.ndarray]], ...] = parents
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Var{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Backpropagate from this node. ``grad`` defaults to ones (scalar losses)."""
        if grad is None:
            grad = np.ones_like(self.value)
        order = _topological_order(self)
        local: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = local.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.accumulate(g)
                continue
            for parent, fn in node._parents:
                if not parent.requires_grad:
                    continue
                contrib = fn(g)
                key = id(parent)
                if key in local:
                    local[key] = local[key] + contrib
                else:
                    local[key] = contrib

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


def _topological_order(root: Var) -> list[Var]:
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def constant(x) -> Var:
    return Var(x, requires_grad=False)


def _make(value, *links) -> Var:
    parents = tuple((p, fn) for p, fn in links if p.requires_grad)
    return Var(value, requires_grad=bool(parents), parents=parents)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise arithmetic

def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _make(
        a.value + b.value,
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _make(
        a.value - b.value,
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return _make(
        a.value * b.value,
        (a, lambda g: _unbroadcast(g * b.value, a.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.shape)),
    )


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    out = a.value / b.value
    return _make(
        out,
        (a, lambda g: _unbroadcast(g / b.value, a.shape)),
        (b, lambda g: _unbroadcast(-g * out / b.value, b.shape)),
    )


def matmul(a, b) -> Var:
    """Batched matrix product; both operands must be at least 2-D."""
    a, b = as_var(a), as_var(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects operands with ndim >= 2")
    return _make(
        a.value @ b.value,
        (a, lambda g: _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape)),
        (b, lambda g: _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape)),
    )


def einsum(spec: str, a, b) -> Var:
    """Two-operand einsum. Each operand index must appear in the output or the other operand."""
    a, b = as_var(a), as_var(b)
    lhs, out = spec.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    return _make(
        np.einsum(spec, a.value, b.value, optimize=True),
        (a, lambda g: np.einsum(f"{out},{sb}->{sa}", g, b.value, optimize=True)),
        (b, lambda g: np.einsum(f"{out},{sa}->{sb}", g, a.value, optimize=True)),
    )


# nonlinearities

def tanh(x) -> Var:
    x = as_var(x)
    out = np.tanh(x.value)
    return _make(out, (x, lambda g: g * (1.0 - out * out)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x) -> Var:
    x = as_var(x)
    out = _sigmoid(x.value)
    return _make(out, (x, lambda g: g * out * (1.0 - out)))


def elu(x, alpha: float = 1.0) -> Var:
    x = as_var(x)
    neg = x.value < 0
    em1 = np.expm1(np.minimum(x.value, 0.0))
    out = np.where(neg, alpha * em1, x.value)
    return _make(out, (x, lambda g: g * np.where(neg, alpha * (em1 + 1.0), 1.0)))


def leaky_relu(x, slope: float = 0.2) -> Var:
    x = as_var(x)
    pos = x.value > 0
    return _make(np.where(pos, x.value, slope * x.value), (x, lambda g: g * np.where(pos, 1.0, slope)))


def exp(x) -> Var:
    x = as_var(x)
    out = np.exp(x.value)
    return _make(out, (x, lambda g: g * out))


def log(x) -> Var:
    x = as_var(x)
    return _make(np.log(x.value), (x, lambda g: g / x.value))


def sqrt(x) -> Var:
    x = as_var(x)
    out = np.sqrt(x.value)
    return _make(out, (x, lambda g: g * 0.5 / out))


# reductions and reshaping

def sum(x, axis=None, keepdims: bool = False) -> Var:  # noqa: A001 - mirrors numpy
    x = as_var(x)
    out = x.value.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, x.shape).copy()

    return _make(out, (x, back))


def mean(x, axis=None, keepdims: bool = False) -> Var:
    x = as_var(x)
    count = x.value.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def reshape(x, shape) -> Var:
    x = as_var(x)
    return _make(x.value.reshape(shape), (x, lambda g: g.reshape(x.shape)))


def swapaxes(x, a1: int, a2: int) -> Var:
    x = as_var(x)
    return _make(np.swapaxes(x.value, a1, a2), (x, lambda g: np.swapaxes(g, a1, a2)))


def transpose(x, axes: Sequence[int]) -> Var:
    x = as_var(x)
    inverse = np.argsort(axes)
    return _make(np.transpose(x.value, axes), (x, lambda g: np.transpose(g, inverse)))


def getitem(x, key) -> Var:
    x = as_var(x)

    def back(g):
        full = np.zeros_like(x.value)
        np.add.at(full, key, g)
        return full

    return _make(x.value[key], (x, back))


def concat(xs: Sequence, axis: int = -1) -> Var:
    xs = [as_var(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    bounds = np.cumsum([0] + sizes)
    links = []
    for k, x in enumerate(xs):
        sl = [slice(None)] * xs[0].ndim
        sl[axis] = slice(bounds[k], bounds[k + 1])
        links.append((x, lambda g, sl=tuple(sl): g[sl]))
    return _make(np.concatenate([x.value for x in xs], axis=axis), *links)


def stack(xs: Sequence, axis: int = 0) -> Var:
    xs = [as_var(x) for x in xs]
    links = [(x, lambda g, k=k: np.take(g, k, axis=axis)) for k, x in enumerate(xs)]
    return _make(np.stack([x.value for x in xs], axis=axis), *links)


def masked_fill(x, mask: np.ndarray, fill: float = NEG_INF) -> Var:
    """Replace entries where ``mask`` is True by a constant; no gradient flows there."""
    x = as_var(x)
    mask = np.broadcast_to(mask, x.shape)
    return _make(np.where(mask, fill, x.value), (x, lambda g: np.where(mask, 0.0, g)))


def log_softmax(x, axis: int = -1) -> Var:
    x = as_var(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return _make(out, (x, lambda g: g - probs * g.sum(axis=axis, keepdims=True)))


def softmax(x, axis: int = -1) -> Var:
    x = as_var(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _make(out, (x, lambda g: out * (g - (g * out).sum(axis=axis, keepdims=True))))


def log_sigmoid(x) -> Var:
    x = as_var(x)
    v = x.value
    out = np.minimum(v, 0.0) - np.log1p(np.exp(-np.abs(v)))
    return _make(out, (x, lambda g: g * _sigmoid(-v)))


# fused recurrent op

def lstm_scan(x, w, u, b) -> Var:
    """Run a left-to-right LSTM over ``x`` of shape (B, T, d_in).

    ``w`` is (4h, d_in), ``u`` is (4h, h) and ``b`` is (4h,), gate blocks ordered
    input, forget, cell, output. Initial hidden and cell states are zero.
    Returns the hidden states, shape (B, T, h). Backward is hand-derived BPTT.
    """
    x, w, u, b = as_var(x), as_var(w), as_var(u), as_var(b)
    bsz, steps, _ = x.shape
    h = u.shape[1]
    xw = x.value @ w.value.T + b.value  # (B, T, 4h)
    hs = np.zeros((bsz, steps + 1, h))
    cs = np.zeros((bsz, steps + 1, h))
    gates = np.empty((bsz, steps, 4 * h))
    tanh_c = np.empty((bsz, steps, h))
    uT = u.value.T
    for t in range(steps):
        z = xw[:, t] + hs[:, t] @ uT
        ig = _sigmoid(z[:, :h])
        fg = _sigmoid(z[:, h : 2 * h])
        cg = np.tanh(z[:, 2 * h : 3 * h])
        og = _sigmoid(z[:, 3 * h :])
        cs[:, t + 1] = fg * cs[:, t] + ig * cg
        tanh_c[:, t] = np.tanh(cs[:, t + 1])
        hs[:, t + 1] = og * tanh_c[:, t]
        gates[:, t] = np.concatenate([ig, fg, cg, og], axis=1)

    cache: dict[str, np.ndarray] = {}

    def bptt(g: np.ndarray) -> None:
        if cache:
            return
        dz = np.empty((bsz, steps, 4 * h))
        dh_next = np.zeros((bsz, h))
        dc_next = np.zeros((bsz, h))
        u_val = u.value
        for t in range(steps - 1, -1, -1):
            ig = gates[:, t, :h]
            fg = gates[:, t, h : 2 * h]
            cg = gates[:, t, 2 * h : 3 * h]
            og = gates[:, t, 3 * h :]
            dh = g[:, t] + dh_next
            tc = tanh_c[:, t]
            dc = dc_next + dh * og * (1.0 - tc * tc)
            dz[:, t, :h] = dc * cg * ig * (1.0 - ig)
            dz[:, t, h : 2 * h] = dc * cs[:, t] * fg * (1.0 - fg)
            dz[:, t, 2 * h : 3 * h] = dc * ig * (1.0 - cg * cg)
            dz[:, t, 3 * h :] = dh * tc * og * (1.0 - og)
            dc_next = dc * fg
            dh_next = dz[:, t] @ u_val
        flat_dz = dz.reshape(-1, 4 * h)
        cache["x"] = dz @ w.value
        cache["w"] = flat_dz.T @ x.value.reshape(-1, x.shape[2])
        cache["u"] = flat_dz.T @ hs[:, :-1].reshape(-1, h)
        cache["b"] = flat_dz.sum(axis=0)

    def grad_for(key):
        def fn(g):
            bptt(g)
            return cache[key]

        return fn

    return _make(hs[:, 1:].copy(), (x, grad_for("x")), (w, grad_for("w")), (u, grad_for("u")), (b, grad_for("b")))
