"""Minimal reverse-mode autodiff core.

Everything trainable in this package is expressed as a graph of `Tensor`
nodes over float64 numpy arrays. Nodes keep references to their parents
and a backward closure, so calling :meth:`Tensor.backward` on a scalar
loss fills ``.grad`` on every reachable tensor, in particular on
:class:`Parameter` leaves. The optimizer is plain Adam followed by a
projection step for non-negative-constrained parameters.

Only NumPy is used for array math; no DL framework is involved.
"""
from __future__ import annotations

import itertools
import json
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

Array = np.ndarray

FREE = "free"
NON_NEGATIVE = "non-negative"

_node_ids = itertools.count()


class NumericFault(ArithmeticError):
    """Raised when a non-finite value shows up in a gradient pass."""


class Tensor:
    """A node in the computation graph.

    ``data`` is always a float64 ndarray. ``requires_grad`` marks leaves
    (parameters, inputs under test) and propagates through ops.
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Optional[Array] = None
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_node_ids)
        self.op = op
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] = lambda: None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, id={self.node_id})"

    def item(self) -> float:
        return float(self.data)

    def _ensure_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)

    def backward(self, check_finite: bool = False) -> None:
        """Reverse pass from a scalar output.

        Fills ``.grad`` on every tensor that requires grad. With
        ``check_finite`` every propagated gradient is scanned and a
        :class:`NumericFault` naming the offending node is raised.
        """
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar output, got shape {self.data.shape}")
        if not np.isfinite(self.data).all():
            raise NumericFault(f"non-finite output value at node {self.node_id} ({self.op})")

        order = topo_order(self)
        self._ensure_grad()
        self.grad = self.grad + np.ones_like(self.data)
        for node in reversed(order):
            if check_finite and node.grad is not None and not np.isfinite(node.grad).all():
                raise NumericFault(f"non-finite gradient at node {node.node_id} ({node.op})")
            node._backward()


def topo_order(output: Tensor) -> list[Tensor]:
    """Topologically ordered node list of the graph below ``output``."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(output, False)]
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


class Parameter(Tensor):
    """A named trainable leaf with an optional non-negativity constraint.

    ``lr_scale`` multiplies the optimizer step size for this parameter
    only (1.0 for almost everything; used to slow a head whose scale a
    skewed label balance would otherwise grind into a dead zone).
    """

    __slots__ = ("name", "constraint", "lr_scale")

    def __init__(self, name: str, data, constraint: str = FREE):
        super().__init__(data, requires_grad=True, op="param")
        if constraint not in (FREE, NON_NEGATIVE):
            raise ValueError(f"unknown constraint {constraint!r}")
        self.name = name
        self.constraint = constraint
        self.lr_scale = 1.0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.data.shape}, constraint={self.constraint!r})"


def init_uniform(rng: np.random.Generator, shape: Sequence[int], fan_in: int,
                 constraint: str = FREE) -> Array:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] for free parameters.

    Free weights use the He bound sqrt(6/fan_in): the stacks here are all
    ReLU, and a smaller bound attenuates both signal and gradient by a
    constant factor per layer, which at eight layers deep leaves the
    model badly underfit within a desk-scale epoch budget.

    Non-negative-constrained weights start in [0, 1/fan_in]: with no sign
    cancellation a positive layer sums ~fan_in same-sign terms, so a
    1/sqrt(fan_in) scale would grow activations geometrically with depth
    (and the optimizer then crushes the whole net onto the projection
    wall at zero, which is gradient-dead). Mean 0.5/fan_in keeps layer
    outputs on the order of their inputs.
    """
    if constraint == NON_NEGATIVE:
        return rng.uniform(0.0, 1.0 / max(fan_in, 1), size=tuple(shape))
    bound = np.sqrt(6.0 / max(fan_in, 1))
    return rng.uniform(-bound, bound, size=tuple(shape))


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: Array, target_shape: tuple[int, ...]) -> Array:
    if g.shape == target_shape:
        return g
    while g.ndim > len(target_shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(target_shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make(op: str, data: Array, parents: tuple[Tensor, ...],
          backward: Callable[[Tensor], None]) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), op=op)
    if out.requires_grad:
        out._parents = parents
        out._backward = lambda: backward(out)
    return out


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(out.grad, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(out.grad, b.shape)

    return _make("add", a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(out.grad, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad -= _unbroadcast(out.grad, b.shape)

    return _make("sub", a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(out.grad * b.data, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad += _unbroadcast(out.grad * a.data, b.shape)

    return _make("mul", a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += _unbroadcast(out.grad / b.data, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            b.grad -= _unbroadcast(out.grad * a.data / (b.data * b.data), b.shape)

    return _make("div", a.data / b.data, (a, b), bw)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad -= out.grad

    return _make("neg", -a.data, (a,), bw)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy broadcasting over leading batch axes."""
    a, b = _as_tensor(a), _as_tensor(b)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            ga = np.matmul(out.grad, np.swapaxes(b.data, -1, -2))
            a.grad += _unbroadcast(ga, a.shape)
        if b.requires_grad:
            b._ensure_grad()
            gb = np.matmul(np.swapaxes(a.data, -1, -2), out.grad)
            b.grad += _unbroadcast(gb, b.shape)

    return _make("matmul", np.matmul(a.data, b.data), (a, b), bw)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0.0

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * mask

    return _make("relu", np.maximum(a.data, 0.0), (a,), bw)


def relu_gate(a) -> Tensor:
    """Right-derivative of ReLU, treated as a constant (zero gradient).

    Value is 1 where the preactivation is >= 0 and 0 elsewhere; the kink
    at exactly 0 takes the right derivative. Used to express the exact
    tau-derivative of the monotone network as a differentiable graph.
    """
    a = _as_tensor(a)
    out = Tensor((a.data >= 0.0).astype(np.float64), op="relu_gate")
    return out


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    s = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                 np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * s * (1.0 - s)

    return _make("sigmoid", s, (a,), bw)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    t = np.tanh(a.data)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * (1.0 - t * t)

    return _make("tanh", t, (a,), bw)


def exp(a) -> Tensor:
    a = _as_tensor(a)
    e = np.exp(a.data)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * e

    return _make("exp", e, (a,), bw)


def log(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad / a.data

    return _make("log", np.log(a.data), (a,), bw)


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed stably; derivative is sigmoid(x)."""
    a = _as_tensor(a)
    x = a.data
    val = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * s

    return _make("softplus", val, (a,), bw)


def cos(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad -= out.grad * np.sin(a.data)

    return _make("cos", np.cos(a.data), (a,), bw)


def sin(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * np.cos(a.data)

    return _make("sin", np.sin(a.data), (a,), bw)


def clamp_min(a, floor: float) -> Tensor:
    """max(a, floor); gradient passes where a > floor (zero at the clamp)."""
    a = _as_tensor(a)
    mask = a.data > floor

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * mask

    return _make("clamp_min", np.maximum(a.data, floor), (a,), bw)


def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along ``axis`` with the exact Jacobian-vector product."""
    a = _as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / np.sum(e, axis=axis, keepdims=True)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            g = out.grad
            a.grad += (g - np.sum(g * s, axis=axis, keepdims=True)) * s

    return _make("softmax", s, (a,), bw)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            g = out.grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis=axis)
            a.grad += np.broadcast_to(g, a.shape)

    return _make("sum", a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)


def reverse_cumsum(a, axis: int = -1) -> Tensor:
    """Suffix sums along ``axis``: out[k] = a[k] + a[k+1] + ...

    Accumulated sequentially, so with non-negative inputs the output is
    exactly non-increasing along the axis in float arithmetic.
    """
    a = _as_tensor(a)
    val = np.flip(np.cumsum(np.flip(a.data, axis=axis), axis=axis), axis=axis)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += np.cumsum(out.grad, axis=axis)

    return _make("reverse_cumsum", val, (a,), bw)


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def bw(out: Tensor) -> None:
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                p._ensure_grad()
                idx = [slice(None)] * out.grad.ndim
                idx[axis] = slice(lo, hi)
                p.grad += out.grad[tuple(idx)]

    return _make("concat", np.concatenate([p.data for p in parts], axis=axis), tuple(parts), bw)


def take(a, index) -> Tensor:
    """Static slice/index of a tensor (no tensor-valued indices)."""
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            np.add.at(a.grad, index, out.grad)

    return _make("take", a.data[index], (a,), bw)


def gather_rows(table, idx: Array) -> Tensor:
    """Row lookup ``table[idx]`` for an integer index array of any shape."""
    table = _as_tensor(table)
    idx = np.asarray(idx)

    def bw(out: Tensor) -> None:
        if table.requires_grad:
            table._ensure_grad()
            np.add.at(table.grad, idx, out.grad)

    return _make("gather_rows", table.data[idx], (table,), bw)


def select_positions(a, idx: Array) -> Tensor:
    """Pick one entry per row from the last axis: out[i] = a[i, idx[i]]."""
    a = _as_tensor(a)
    idx = np.asarray(idx)
    rows = np.arange(a.data.shape[0])

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            np.add.at(a.grad, (rows, idx), out.grad)

    return _make("select_positions", a.data[rows, idx], (a,), bw)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad.reshape(a.shape)

    return _make("reshape", a.data.reshape(shape), (a,), bw)


def swap_last_axes(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += np.swapaxes(out.grad, -1, -2)

    return _make("swap_last_axes", np.swapaxes(a.data, -1, -2), (a,), bw)


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * c

    return _make("scale", a.data * c, (a,), bw)


def square(a) -> Tensor:
    a = _as_tensor(a)

    def bw(out: Tensor) -> None:
        if a.requires_grad:
            a._ensure_grad()
            a.grad += out.grad * (2.0 * a.data)

    return _make("square", a.data * a.data, (a,), bw)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

def project_nonnegative(param: Parameter) -> Parameter:
    """Clip a constrained parameter's value to >= 0 in place; gradient untouched."""
    if param.constraint != NON_NEGATIVE:
        raise ValueError(f"{param.name} is not non-negative-constrained")
    np.maximum(param.data, 0.0, out=param.data)
    return param


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.data)


class Adam:
    """Standard Adam followed by projection of constrained parameters.

    ``grad_clip`` rescales the whole gradient to that global L2 norm when
    it is exceeded, before the moment updates; unbounded loss terms (a
    log of a rate that can touch zero) otherwise poison the moments.
    """

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 grad_clip: Optional[float] = None):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.grad_clip = grad_clip
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        scale = 1.0
        if self.grad_clip is not None:
            total = np.sqrt(sum(float(np.sum(p.grad * p.grad))
                                for p in self.params if p.grad is not None))
            if total > self.grad_clip:
                scale = self.grad_clip / total
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {g.shape} does not match value shape "
                    f"{p.data.shape} for {p.name}")
            if scale != 1.0:
                g = g * scale
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[i] / (1.0 - self.beta1 ** t)
            v_hat = self.v[i] / (1.0 - self.beta2 ** t)
            p.data -= self.lr * p.lr_scale * m_hat / (np.sqrt(v_hat) + self.eps)
            if p.constraint == NON_NEGATIVE:
                project_nonnegative(p)


def adam_update(params: Sequence[Parameter], state: Adam) -> None:
    """One optimizer step over ``params`` using an existing Adam state."""
    if list(state.params) != list(params):
        raise ValueError("Adam state was built for a different parameter list")
    state.step()


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------

_MAGIC = "COUPA-CHECKPOINT 1"


def save_checkpoint(path: str, params: Sequence[Parameter], config: Optional[dict] = None) -> None:
    """Write parameters (and an optional JSON config) to a text checkpoint.

    Values are serialized with repr(), which round-trips float64 exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC + "\n")
        fh.write(json.dumps(config or {}, sort_keys=True) + "\n")
        for p in params:
            dims = " ".join(str(d) for d in p.data.shape)
            fh.write(f"param {p.name} {p.constraint} {p.data.ndim} {dims}\n")
            fh.write(" ".join(repr(v) for v in p.data.ravel().tolist()) + "\n")


def load_checkpoint(path: str) -> tuple[dict[str, Parameter], dict]:
    """Read a checkpoint back into {name: Parameter} plus its config dict."""
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline().rstrip("\n")
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad header {magic!r})")
        config = json.loads(fh.readline())
        params: dict[str, Parameter] = {}
        while True:
            header = fh.readline()
            if not header:
                break
            fields = header.split()
            if len(fields) < 4 or fields[0] != "param":
                raise ValueError(f"{path}: malformed parameter header {header!r}")
            name, constraint, ndim = fields[1], fields[2], int(fields[3])
            shape = tuple(int(d) for d in fields[4:4 + ndim])
            values = fh.readline().split()
            data = np.array([float(v) for v in values], dtype=np.float64).reshape(shape)
            params[name] = Parameter(name, data, constraint)
    return params, config
