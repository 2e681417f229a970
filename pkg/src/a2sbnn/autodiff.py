"""Small define-by-run reverse-mode autodiff over numpy float64 arrays.

Every pullback is written with the same differentiable ops it serves, so
running :func:`grad` with ``create_graph=True`` yields gradients that can be
differentiated again (used by the critic's gradient penalty).

Binary ops broadcast only over leading dimensions (or against a 0-d scalar);
other broadcasting is a :class:`ShapeError`.
"""

from __future__ import annotations

import contextlib
import threading

import numpy as np

from .errors import GraphError, NumericError, ShapeError

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextlib.contextmanager
def set_grad_enabled(flag: bool):
    prev = is_grad_enabled()
    _state.enabled = flag
    try:
        yield
    finally:
        _state.enabled = prev


def no_grad():
    return set_grad_enabled(False)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "op", "__weakref__")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = ()
        self._backward = None
        self.op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return not self._parents

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self, create_graph: bool = False):
        """Accumulate d(self)/d(leaf) into ``leaf.grad`` for every requires_grad leaf."""
        if self.size != 1:
            raise ShapeError(f"backward() needs a scalar, got shape {self.shape}")
        grads = _backprop(self, Tensor(np.ones(self.shape)), create_graph)
        for node, g in grads.items():
            if node.is_leaf and node.requires_grad:
                gd = g if create_graph else g.data
                if node.grad is None:
                    node.grad = gd
                else:
                    node.grad = node.grad + gd

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __matmul__ = lambda self, o: matmul(self, o)
    __neg__ = lambda self: neg(self)
    __getitem__ = lambda self, idx: slice_(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward, op) -> Tensor:
    out = Tensor(data)
    out.op = op
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _check_finite(data, op):
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by op '{op}'")


# ---- graph traversal ------------------------------------------------------

def _toposort(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def _backprop(root: Tensor, seed: Tensor, create_graph: bool, targets=None) -> dict:
    if not root.requires_grad:
        return {}
    order = _toposort(root)
    if targets is None:
        needed = {id(n) for n in order}
    else:
        # keep only nodes with a path down to a requested input
        needed = set(targets)
        for n in order:
            if any(id(p) in needed for p in n._parents):
                needed.add(id(n))
    grads = {id(root): seed}
    nodes = {id(n): n for n in order}
    with set_grad_enabled(create_graph):
        for node in reversed(order):
            g = grads.get(id(node))
            if g is None or node._backward is None:
                continue
            needs = tuple(p.requires_grad and id(p) in needed for p in node._parents)
            for parent, need, pg in zip(node._parents, needs, node._backward(g, needs)):
                if pg is None or not need:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else add(prev, pg)
    return {nodes[k]: v for k, v in grads.items()}


def grad(output: Tensor, inputs, grad_output=None, create_graph: bool = False,
         allow_unused: bool = False) -> list:
    """Gradients of ``output`` w.r.t. each tensor in ``inputs`` (no accumulation).

    With ``create_graph=True`` the results are graph nodes and can be
    differentiated again.
    """
    single = isinstance(inputs, Tensor)
    inputs = [inputs] if single else list(inputs)
    if grad_output is None:
        if output.size != 1:
            raise ShapeError(f"grad() of non-scalar output {output.shape} needs grad_output")
        grad_output = Tensor(np.ones(output.shape))
    grads = _backprop(output, _wrap(grad_output), create_graph, {id(x) for x in inputs})
    by_id = {id(k): v for k, v in grads.items()}
    result = []
    for x in inputs:
        g = by_id.get(id(x))
        if g is None:
            if not allow_unused:
                raise GraphError("input tensor is not part of the output's graph")
            g = Tensor(np.zeros(x.shape))
        elif not create_graph:
            g = g.detach()
        result.append(g)
    return result[0] if single else result


def grad_wrt_input(f: Tensor, x: Tensor) -> Tensor:
    """d f / d x as differentiable graph nodes; sums ``f`` first when not scalar."""
    if f.size != 1:
        f = sum_(f)
    return grad(f, x, create_graph=True)


# ---- broadcasting helpers ----------------------------------------------------

def _broadcast_shape(a, b):
    if a == b:
        return a
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    if len(a) < len(b) and b[len(b) - len(a):] == a:
        return b
    if len(b) < len(a) and a[len(a) - len(b):] == b:
        return a
    raise ShapeError(f"incompatible shapes {a} and {b} (only leading-dimension broadcast)")


def reduce_to(x: Tensor, shape) -> Tensor:
    """Sum ``x`` down to ``shape`` (inverse of :func:`expand`)."""
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and x.shape[i + lead] != 1)
    data = x.data.sum(axis=axes, keepdims=True)
    data = data.reshape(shape)
    in_shape = x.shape
    return _node(data, (x,), lambda g, nd: (expand(g, in_shape),), "reduce_to")


def expand(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    if x.shape == shape:
        return x
    data = np.broadcast_to(x.data, shape).copy()
    in_shape = x.shape
    return _node(data, (x,), lambda g, nd: (reduce_to(g, in_shape),), "expand")


def broadcast(x, shape) -> Tensor:
    """Leading-dimension broadcast of ``x`` to ``shape``."""
    x = _wrap(x)
    if _broadcast_shape(x.shape, tuple(shape)) != tuple(shape):
        raise ShapeError(f"cannot broadcast {x.shape} to {tuple(shape)}")
    return expand(x, shape)


# ---- primitives -------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b),
                 lambda g, nd: (reduce_to(g, sa) if nd[0] else None,
                                reduce_to(g, sb) if nd[1] else None), "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b),
                 lambda g, nd: (reduce_to(g, sa) if nd[0] else None,
                                reduce_to(neg(g), sb) if nd[1] else None), "sub")


def neg(a) -> Tensor:
    a = _wrap(a)
    return _node(-a.data, (a,), lambda g, nd: (neg(g),), "neg")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return _node(a.data * b.data, (a, b),
                 lambda g, nd: (reduce_to(mul(g, b), sa) if nd[0] else None,
                                reduce_to(mul(g, a), sb) if nd[1] else None), "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a.shape, b.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = a.data / b.data
    _check_finite(data, "div")
    sa, sb = a.shape, b.shape

    def back(g, nd):
        ga = div(g, b)
        return (reduce_to(ga, sa) if nd[0] else None,
                reduce_to(neg(mul(ga, div(a, b))), sb) if nd[1] else None)
    return _node(data, (a, b), back, "div")


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} @ {b.shape}")
    return _node(a.data @ b.data, (a, b),
                 lambda g, nd: (matmul(g, transpose(b)) if nd[0] else None,
                                matmul(transpose(a), g) if nd[1] else None), "matmul")


def transpose(a) -> Tensor:
    a = _wrap(a)
    if a.ndim != 2:
        raise ShapeError("transpose needs a 2-D tensor")
    return _node(a.data.T, (a,), lambda g, nd: (transpose(g),), "transpose")


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    in_shape = a.shape
    return _node(a.data.reshape(shape), (a,), lambda g, nd: (reshape(g, in_shape),), "reshape")


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    in_shape = a.shape
    data = a.data.sum(axis=axis, keepdims=keepdims)
    if axis is None:
        kd_shape = (1,) * a.ndim
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        axes = tuple(ax % a.ndim for ax in axes)
        kd_shape = tuple(1 if i in axes else s for i, s in enumerate(in_shape))
    return _node(data, (a,), lambda g, nd: (expand(reshape(g, kd_shape), in_shape),), "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    total = sum_(a, axis, keepdims)
    count = a.size // max(total.size, 1)
    return mul(total, 1.0 / count)


def square(a) -> Tensor:
    a = _wrap(a)
    return _node(a.data * a.data, (a,), lambda g, nd: (mul(g, mul(a, 2.0)),), "square")


def sqrt(a) -> Tensor:
    a = _wrap(a)
    if np.any(a.data < 0):
        raise NumericError(f"sqrt of negative value (input from op '{a.op}')")

    def back(g, nd):
        return (div(mul(g, 0.5), out),)
    out = _node(np.sqrt(a.data), (a,), back, "sqrt")
    return out


def exp(a) -> Tensor:
    a = _wrap(a)
    data = np.exp(a.data)
    _check_finite(data, "exp")

    def back(g, nd):
        return (mul(g, out),)
    out = _node(data, (a,), back, "exp")
    return out


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    data = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def back(g, nd):
        return (mul(g, mul(out, sub(1.0, out))),)
    out = _node(data, (a,), back, "sigmoid")
    return out


def elu(a, alpha: float = 1.0) -> Tensor:
    a = _wrap(a)
    pos = a.data > 0
    data = np.where(pos, a.data, alpha * np.expm1(np.minimum(a.data, 0.0)))
    mask = Tensor(pos.astype(np.float64))
    inv = Tensor((~pos).astype(np.float64))

    def back(g, nd):
        # d/dx = 1 for x > 0, elu(x) + alpha otherwise
        return (mul(g, add(mask, mul(inv, add(out, alpha)))),)
    out = _node(data, (a,), back, "elu")
    return out


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _wrap(a)
    pos = a.data > 0
    d = Tensor(np.where(pos, 1.0, slope))
    data = np.maximum(a.data, slope * a.data) if 0 <= slope <= 1 else np.where(pos, a.data, slope * a.data)
    return _node(data, (a,), lambda g, nd: (mul(g, d),), "leaky_relu")


def abs_(a) -> Tensor:
    a = _wrap(a)
    s = Tensor(np.sign(a.data))
    return _node(np.abs(a.data), (a,), lambda g, nd: (mul(g, s),), "abs")


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    ax = axis % data.ndim
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def back(g, nd):
        parts = []
        for need, lo, hi in zip(nd, bounds[:-1], bounds[1:]):
            if not need:
                parts.append(None)
                continue
            idx = [slice(None)] * g.ndim
            idx[ax] = slice(int(lo), int(hi))
            parts.append(slice_(g, tuple(idx)))
        return tuple(parts)
    return _node(data, tuple(tensors), back, "concat")


def slice_(a, idx) -> Tensor:
    a = _wrap(a)
    in_shape = a.shape
    return _node(a.data[idx].copy(), (a,), lambda g, nd: (_scatter(g, in_shape, idx),), "slice")


def _scatter(g: Tensor, shape, idx) -> Tensor:
    data = np.zeros(shape)
    data[idx] = g.data
    return _node(data, (g,), lambda gg, nd: (slice_(gg, idx),), "scatter")


def norm2(a, axis=None, eps: float = 0.0) -> Tensor:
    """Euclidean norm along ``axis``; ``eps`` inside the root keeps the gradient finite at 0."""
    s = sum_(square(a), axis)
    if eps:
        s = add(s, eps)
    return sqrt(s)
