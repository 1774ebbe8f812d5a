"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array plus an optional gradient accumulator. Ops
record a backward closure on a tape; ``backward()`` walks the graph in
reverse topological order and sums gradients across fan-out. Broadcasting
follows numpy's rules for size-1/leading axes; anything that does not
broadcast raises ShapeError up front.
"""

from __future__ import annotations

import numbers

import numpy as np

from . import fft as _fft
from .errors import NumericError, ShapeError

_GRAD_ENABLED = True


class no_grad:
    """Context manager: ops inside build no tape (pure evaluation)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- basic introspection ------------------------------------------------

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
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    # -- autodiff -----------------------------------------------------------

    def backward(self, seed: np.ndarray | None = None):
        if seed is None:
            if self.data.size != 1:
                raise ShapeError(
                    f"backward() needs a scalar output or explicit seed, got shape {self.shape}"
                )
            seed = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                # Fan-out sums; grads are never mutated in place, so sharing is safe.
                parent.grad = g if parent.grad is None else parent.grad + g
            if node is not self:
                node.grad = None  # free intermediate gradients early

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_ensure(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_ensure(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def _ensure(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (numbers.Number, np.ndarray, list, tuple)):
        return Tensor(x)
    raise TypeError(f"cannot treat {type(x).__name__} as Tensor")


def _node(data: np.ndarray, parents, backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, opname: str):
    if a.data.shape == b.data.shape:
        return
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise binary ops ---------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _check_broadcast(a, b, "add")
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _check_broadcast(a, b, "sub")
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _check_broadcast(a, b, "mul")
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    _check_broadcast(a, b, "div")
    return _node(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def maximum(a, b) -> Tensor:
    """Elementwise max; on ties the gradient routes to the first argument."""
    a, b = _ensure(a), _ensure(b)
    _check_broadcast(a, b, "maximum")
    mask = (a.data >= b.data).astype(np.float64)
    return _node(
        np.maximum(a.data, b.data),
        (a, b),
        lambda g: (_unbroadcast(g * mask, a.shape), _unbroadcast(g * (1.0 - mask), b.shape)),
    )


# -- elementwise unary ops ----------------------------------------------------


def neg(a) -> Tensor:
    a = _ensure(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def power(a, p) -> Tensor:
    a = _ensure(a)
    p = float(p)
    out = a.data**p
    return _node(out, (a,), lambda g: (g * p * a.data ** (p - 1.0),))


def exp(a) -> Tensor:
    a = _ensure(a)
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = _ensure(a)
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _ensure(a)
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a) -> Tensor:
    a = _ensure(a)
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a) -> Tensor:
    a = _ensure(a)
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a) -> Tensor:
    a = _ensure(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _node(a.data * s, (a,), lambda g: (g * s * (1.0 + a.data * (1.0 - s)),))


def relu(a) -> Tensor:
    a = _ensure(a)
    mask = (a.data > 0).astype(np.float64)
    return _node(a.data * mask, (a,), lambda g: (g * mask,))


def absolute(a) -> Tensor:
    a = _ensure(a)
    sign = np.sign(a.data)
    return _node(np.abs(a.data), (a,), lambda g: (g * sign,))


def xlogx(a, tiny: float = 1e-300) -> Tensor:
    """x*log(x) with the 0*log(0) -> 0 limit; gradient clamped to 0 there."""
    a = _ensure(a)
    safe = np.where(a.data > tiny, a.data, 1.0)
    out = np.where(a.data > tiny, a.data * np.log(safe), 0.0)
    dgrad = np.where(a.data > tiny, np.log(safe) + 1.0, 0.0)
    return _node(out, (a,), lambda g: (g * dgrad,))


# -- shape ops ----------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _ensure(a)
    shape = tuple(shape) if not isinstance(shape, int) else (shape,)
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Tensor:
    a = _ensure(a)
    axes = tuple(axes)
    inv = [0] * len(axes)
    for i, ax in enumerate(axes):
        inv[ax] = i
    inv = tuple(inv)
    return _node(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def take(a, idx) -> Tensor:
    """Basic indexing (ints/slices/ellipsis); no repeated advanced indices."""
    a = _ensure(a)

    def _bw(g):
        full = np.zeros(a.shape)
        full[idx] += g
        return (full,)

    return _node(a.data[idx], (a,), _bw)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_ensure(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw(g):
        sl = [slice(None)] * g.ndim
        grads = []
        for i in range(len(tensors)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tensors, _bw)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_ensure(t) for t in tensors]

    def _bw(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _node(np.stack([t.data for t in tensors], axis=axis), tensors, _bw)


# -- reductions ----------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)

    def _bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape),)

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), _bw)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)
    count = a.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])

    def _bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape) / count,)

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), _bw)


# -- linear algebra -------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul batch dimensions do not broadcast: {a.shape} @ {b.shape}") from None

    if b.ndim == 2:
        # Plain weight matrix: collapse batch dims into one DGEMM each way.
        k, n = b.shape
        a2 = a.data.reshape(-1, k)

        def _bw2(g):
            g2 = g.reshape(-1, n)
            return ((g2 @ b.data.T).reshape(a.shape), a2.T @ g2)

        return _node((a2 @ b.data).reshape(a.shape[:-1] + (n,)), (a, b), _bw2)

    def _bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _node(a.data @ b.data, (a, b), _bw)


def softmax(a, axis: int = -1) -> Tensor:
    """Row-stochastic exp-normalization, computed with max-subtraction."""
    a = _ensure(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def _bw(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return _node(out, (a,), _bw)


# -- Fourier transform ------------------------------------------------------------


def dft_real(a) -> tuple[Tensor, Tensor]:
    """Differentiable DFT of a real tensor along its last axis.

    Returns (re, im), each shaped like the input. The backward pass is the
    adjoint DFT: grad_x = Re(DFT(conj(G))) for upstream G = g_re + i*g_im.
    """
    a = _ensure(a)
    re, im = _fft.fft_real_raw(a.data)

    def _bw(g):
        hr, _ = _fft.fft_complex(g[0], -g[1])
        return (hr,)

    stacked = _node(np.stack([re, im]), (a,), _bw)
    return take(stacked, 0), take(stacked, 1)


# -- gradient checking --------------------------------------------------------------


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative disagreement between reverse-mode and central differences.

    Relative error per entry is |analytic - numeric| / max(1, |numeric|);
    returns the max over entries of x.
    """
    leaf = Tensor(x.data.copy(), requires_grad=True)
    out = f(leaf)
    if not np.all(np.isfinite(out.data)):
        raise NumericError("grad_check: function returned non-finite output")
    out.backward()
    analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)

    flat = leaf.data.reshape(-1)
    worst = 0.0
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f(leaf).data)
            flat[i] = orig - eps
            lo = float(f(leaf).data)
            flat[i] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError("grad_check: non-finite output under perturbation")
            numeric = (hi - lo) / (2.0 * eps)
            err = abs(analytic.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def grad_check_many(f, tensors, eps: float = 1e-5) -> np.ndarray:
    """Per-entry relative errors for a scalar function of several tensors.

    ``f()`` must read the passed tensors by reference. Returns the
    concatenated array of relative errors across all entries.
    """
    out = f()
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]
    for t in tensors:
        t.zero_grad()

    errs = []
    with no_grad():
        for t, ana in zip(tensors, analytic):
            flat = t.data.reshape(-1)
            aflat = ana.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = float(f().data)
                flat[i] = orig - eps
                lo = float(f().data)
                flat[i] = orig
                numeric = (hi - lo) / (2.0 * eps)
                errs.append(abs(aflat[i] - numeric) / max(1.0, abs(numeric)))
    return np.asarray(errs)
