"""Dense float64 tensors with dynamic tape-based reverse-mode autodiff.

Every operation that sees a grad-requiring input records its parents and a
backward closure on the tensor it produces. ``backward()`` replays recorded
nodes in reverse creation order, so gradients through fan-out accumulate
additively. Shapes broadcast numpy-style; gradients are summed back down to
the parent shape.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

_ids = itertools.count()

_grad_enabled = True


class no_grad:
    """Context manager that suspends graph recording."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class NumericError(FloatingPointError):
    """Non-finite values where finite ones are required."""


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None
        self._id = next(_ids)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- graph -----------------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            # materialize views/broadcasts; first write needs no zero fill
            self.grad = np.array(g, dtype=np.float64)
        else:
            self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad=None) -> None:
        """Reverse-mode sweep from this tensor.

        Nodes are replayed in reverse creation order, which is a valid
        reverse-topological order for a dynamically built graph.
        """
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without an explicit seed needs a scalar")
            grad = np.ones_like(self.data)
        self._accumulate(_as_array(grad))

        visited: set[int] = set()
        nodes: list[Tensor] = []

        stack = [self]
        while stack:
            t = stack.pop()
            if t._id in visited or t._backward is None:
                continue
            visited.add(t._id)
            nodes.append(t)
            stack.extend(t._parents)
        nodes.sort(key=lambda t: t._id, reverse=True)
        for node in nodes:
            node._backward()
        # op closures reference their output tensor, which makes every graph a
        # reference cycle; break the cycles so memory frees without gc passes.
        # A graph can therefore only be swept once.
        for node in nodes:
            node._backward = None
            node._parents = ()

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __truediv__(self, other):
        return mul(self, power(_wrap(other), -1.0))

    def __rtruediv__(self, other):
        return mul(_wrap(other), power(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def item(self) -> float:
        return float(self.data.reshape(()))


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def _record(out: Tensor, parents: Sequence[Tensor], backward: Callable[[], None]) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent shape."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data)

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad, b.shape))

    return _record(out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data)

    def backward():
        if a.requires_grad:
            a._accumulate(_unbroadcast(out.grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(out.grad * a.data, b.shape))

    return _record(out, (a, b), backward)


def power(a, p: float) -> Tensor:
    a = _wrap(a)
    p = float(p)
    out = Tensor(a.data ** p)

    def backward():
        a._accumulate(_unbroadcast(out.grad * p * a.data ** (p - 1.0), a.shape))

    return _record(out, (a,), backward)


def clip_max(a, hi: float) -> Tensor:
    """Elementwise min(a, hi); gradient is blocked where the cap binds."""
    a = _wrap(a)
    mask = a.data <= hi
    out = Tensor(np.where(mask, a.data, hi))

    def backward():
        a._accumulate(_unbroadcast(out.grad * mask, a.shape))

    return _record(out, (a,), backward)


def log(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.log(a.data))

    def backward():
        a._accumulate(_unbroadcast(out.grad / a.data, a.shape))

    return _record(out, (a,), backward)


def exp(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.exp(a.data))

    def backward():
        a._accumulate(_unbroadcast(out.grad * out.data, a.shape))

    return _record(out, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = Tensor(s)

    def backward():
        a._accumulate(_unbroadcast(out.grad * s * (1.0 - s), a.shape))

    return _record(out, (a,), backward)


_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(a) -> Tensor:
    a = _wrap(a)
    cdf = 0.5 * (1.0 + erf(a.data * _INV_SQRT2))
    out = Tensor(a.data * cdf)

    def backward():
        pdf = np.exp(-0.5 * a.data * a.data) * _INV_SQRT2PI
        a._accumulate(_unbroadcast(out.grad * (cdf + a.data * pdf), a.shape))

    return _record(out, (a,), backward)


# -- reductions ------------------------------------------------------------


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward():
        g = out.grad
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy() if g.shape != a.shape else g)

    return _record(out, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    count = a.data.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def max_(a, axis: int, keepdims: bool = False) -> Tensor:
    """Max along one axis; gradient flows to the first attaining element."""
    a = _wrap(a)
    out_data = a.data.max(axis=axis, keepdims=keepdims)
    argmax = a.data.argmax(axis=axis)
    out = Tensor(out_data)

    def backward():
        g = out.grad if keepdims else np.expand_dims(out.grad, axis)
        grad = np.zeros_like(a.data)
        idx = list(np.indices(argmax.shape))
        idx.insert(axis if axis >= 0 else a.ndim + axis, argmax)
        grad[tuple(idx)] = g.squeeze(axis)
        a._accumulate(grad)

    return _record(out, (a,), backward)


# -- shape manipulation ----------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.reshape(shape))

    def backward():
        a._accumulate(out.grad.reshape(a.shape))

    return _record(out, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _wrap(a)
    axes = tuple(axes)
    out = Tensor(a.data.transpose(axes))
    inverse = tuple(np.argsort(axes))

    def backward():
        a._accumulate(out.grad.transpose(inverse))

    return _record(out, (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                t._accumulate(np.take(out.grad, range(lo, hi), axis=axis))

    return _record(out, tuple(tensors), backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        t = _wrap(t)
        shape = list(t.shape)
        shape.insert(axis if axis >= 0 else t.ndim + axis + 1, 1)
        expanded.append(reshape(t, shape))
    return concat(expanded, axis=axis)


# -- linear algebra --------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product with numpy-style batch broadcasting on leading axes."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul expects tensors of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    out = Tensor(np.matmul(a.data, b.data))

    def backward():
        if a.requires_grad:
            ga = np.matmul(out.grad, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), out.grad)
            b._accumulate(_unbroadcast(gb, b.shape))

    return _record(out, (a, b), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Numerically stabilized softmax (row max subtracted before exp)."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def backward():
        g = out.grad
        dot = (g * s).sum(axis=axis, keepdims=True)
        a._accumulate(s * (g - dot))

    return _record(out, (a,), backward)


def layernorm(x, gamma, beta_param, eps: float = 1e-5) -> Tensor:
    """Normalize over the last (feature) axis, then scale and shift."""
    x, gamma, beta_param = _wrap(x), _wrap(gamma), _wrap(beta_param)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = Tensor(xhat * gamma.data + beta_param.data)

    def backward():
        g = out.grad
        if gamma.requires_grad:
            gamma._accumulate(_unbroadcast(g * xhat, gamma.shape))
        if beta_param.requires_grad:
            beta_param._accumulate(_unbroadcast(g, beta_param.shape))
        if x.requires_grad:
            dxhat = g * gamma.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv_std * (dxhat - m1 - xhat * m2))

    return _record(out, (x, gamma, beta_param), backward)


def conv3d(x, weight, bias=None, stride=(1, 1, 1), padding=(1, 1, 1)) -> Tensor:
    """3-D convolution over (N, Cin, T, H, W) with weight (Cout, Cin, kt, kh, kw)."""
    x, weight = _wrap(x), _wrap(weight)
    if x.ndim != 5 or weight.ndim != 5:
        raise ShapeError("conv3d expects 5-D input and weight")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv3d channel mismatch: {x.shape} vs {weight.shape}")
    n, cin, t, h, w = x.shape
    cout, _, kt, kh, kw = weight.shape
    st, sh, sw = stride
    pt, ph, pw = padding
    xp = np.pad(x.data, ((0, 0), (0, 0), (pt, pt), (ph, ph), (pw, pw)))
    to = (t + 2 * pt - kt) // st + 1
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (w + 2 * pw - kw) // sw + 1
    npos = to * ho * wo
    # im2col: one (Cout, Cin*k^3) x (N, Cin*k^3, P) BLAS product per pass
    cols = np.empty((n, cin * kt * kh * kw, npos))
    row = 0
    for a in range(kt):
        for b in range(kh):
            for c in range(kw):
                patch = xp[:, :, a : a + to * st : st, b : b + ho * sh : sh, c : c + wo * sw : sw]
                cols[:, row : row + cin, :] = patch.reshape(n, cin, npos)
                row += cin
    wmat = weight.data.transpose(0, 2, 3, 4, 1).reshape(cout, cin * kt * kh * kw)
    out_data = np.matmul(wmat, cols).reshape(n, cout, to, ho, wo)
    if bias is not None:
        out_data += _wrap(bias).data.reshape(1, cout, 1, 1, 1)
    out = Tensor(out_data)
    parents = (x, weight) if bias is None else (x, weight, _wrap(bias))

    def backward():
        g = out.grad.reshape(n, cout, npos)
        if weight.requires_grad:
            gmat = g.transpose(1, 0, 2).reshape(cout, -1)
            cmat = cols.transpose(1, 0, 2).reshape(cols.shape[1], -1)
            gw = np.matmul(gmat, cmat.T)
            weight._accumulate(gw.reshape(cout, kt, kh, kw, cin).transpose(0, 4, 1, 2, 3))
        if x.requires_grad:
            gcols = np.matmul(wmat.T, g)  # (n, cin*k^3, P)
            gxp = np.zeros_like(xp)
            r = 0
            for a in range(kt):
                for b in range(kh):
                    for c in range(kw):
                        gxp[:, :, a : a + to * st : st, b : b + ho * sh : sh, c : c + wo * sw : sw] += gcols[
                            :, r : r + cin, :
                        ].reshape(n, cin, to, ho, wo)
                        r += cin
            x._accumulate(gxp[:, :, pt : pt + t, ph : ph + h, pw : pw + w])
        if bias is not None and parents[2].requires_grad:
            parents[2]._accumulate(g.sum(axis=(0, 2)).reshape(cout))

    return _record(out, parents, backward)


def check_finite(t: Tensor, what: str = "tensor") -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NumericError(f"non-finite values in {what}")
    return t
