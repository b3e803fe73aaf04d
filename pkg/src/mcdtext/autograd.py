"""Dense float64 reverse-mode autodiff core.

Everything learnable in the toolkit is expressed through the primitives in
this module: 2-D float64 tensors, a handful of differentiable ops with
hand-written backward rules, inverted dropout masks, binary cross-entropy,
and a finite-difference gradient checker. Graphs are tiny (a few thousand
nodes), so clarity beats throughput everywhere.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True
_CHECK_VALUES = False


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (pure forward passes)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


@contextlib.contextmanager
def checked():
    """Reject non-finite values at tensor construction inside the block."""
    global _CHECK_VALUES
    prev = _CHECK_VALUES
    _CHECK_VALUES = True
    try:
        yield
    finally:
        _CHECK_VALUES = prev


class Tensor:
    """A 2-D float64 array plus the bookkeeping needed for backward().

    The recorded graph (parents + backward closures) is the computation
    record: replaying the same ops on the same values reproduces outputs
    bit-for-bit, and backward() visits nodes in reverse topological order.
    """

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents: tuple = (), backward=None):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {arr.shape}")
        if _CHECK_VALUES and not np.all(np.isfinite(arr)):
            raise ValueError("non-finite value in tensor")
        self.value = arr
        self.grad = None
        self._parents = parents if _GRAD_ENABLED else ()
        self._backward = backward if _GRAD_ENABLED else None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this (scalar or full) tensor through the graph."""
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.value))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar; constants (floats/arrays) are allowed on either side
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -np.asarray(other, dtype=np.float64))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.value.shape})"


def _as_const(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    # reverse numpy broadcasting over the two axes
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _binary(a, b, fwd, bwd_a, bwd_b):
    """Build a binary op; either operand may be a plain constant."""
    at = isinstance(a, Tensor)
    bt = isinstance(b, Tensor)
    av = a.value if at else _as_const(a)
    bv = b.value if bt else _as_const(b)
    out_value = fwd(av, bv)
    parents = tuple(x for x in (a, b) if isinstance(x, Tensor))
    if not parents or not _GRAD_ENABLED:
        return Tensor(out_value)

    def backward(g: np.ndarray) -> None:
        if at:
            a._accumulate(_unbroadcast(bwd_a(g, av, bv), av.shape))
        if bt:
            b._accumulate(_unbroadcast(bwd_b(g, av, bv), bv.shape))

    return Tensor(out_value, parents, backward)


def add(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x + y,
                   lambda g, x, y: g,
                   lambda g, x, y: g)


def mul(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x * y,
                   lambda g, x, y: g * y,
                   lambda g, x, y: g * x)


def matmul(a, b) -> Tensor:
    at = isinstance(a, Tensor)
    bt = isinstance(b, Tensor)
    av = a.value if at else _as_const(a)
    bv = b.value if bt else _as_const(b)
    if av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul shape mismatch: {av.shape} x {bv.shape}")
    if not (at or bt):
        return Tensor(av @ bv)
    out = Tensor(av @ bv, tuple(x for x in (a, b) if isinstance(x, Tensor)))
    if not _GRAD_ENABLED:
        return out

    def backward(g: np.ndarray) -> None:
        if at:
            a._accumulate(g @ bv.T)
        if bt:
            b._accumulate(av.T @ g)

    out._backward = backward
    return out


def transpose(a) -> Tensor:
    if not isinstance(a, Tensor):
        return Tensor(_as_const(a).T)
    out = Tensor(a.value.T, (a,))
    if _GRAD_ENABLED:
        out._backward = lambda g: a._accumulate(g.T)
    return out


def power(a: Tensor, p: float) -> Tensor:
    out = Tensor(a.value ** p, (a,))
    if _GRAD_ENABLED:
        out._backward = lambda g: a._accumulate(g * p * a.value ** (p - 1.0))
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.value), (a,))
    if _GRAD_ENABLED:
        out._backward = lambda g: a._accumulate(g / a.value)
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.value, 0.0), (a,))
    if _GRAD_ENABLED:
        out._backward = lambda g: a._accumulate(g * (a.value > 0.0))
    return out


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    # piecewise form avoids overflow of exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x):
    """Logistic function. Works on floats, arrays, and tensors."""
    if isinstance(x, Tensor):
        s = _sigmoid_array(x.value)
        out = Tensor(s, (x,))
        if _GRAD_ENABLED:
            out._backward = lambda g: x._accumulate(g * s * (1.0 - s))
        return out
    arr = np.asarray(x, dtype=np.float64)
    res = _sigmoid_array(arr)
    return float(res) if arr.ndim == 0 else res


def _softmax_rows_array(m: np.ndarray) -> np.ndarray:
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(m):
    """Row-wise softmax with max-subtraction, on arrays or tensors."""
    if isinstance(m, Tensor):
        s = _softmax_rows_array(m.value)
        out = Tensor(s, (m,))
        if _GRAD_ENABLED:
            def backward(g: np.ndarray) -> None:
                inner = (g * s).sum(axis=1, keepdims=True)
                m._accumulate(s * (g - inner))
            out._backward = backward
        return out
    return _softmax_rows_array(np.asarray(m, dtype=np.float64))


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    """Mean reduction; axis=None -> (1,1), axis=0 -> (1,d), axis=1 -> (n,1)."""
    if axis is None:
        value = np.asarray(a.value.mean()).reshape(1, 1)
    else:
        value = a.value.mean(axis=axis, keepdims=True)
    out = Tensor(value, (a,))
    if _GRAD_ENABLED:
        count = a.value.size if axis is None else a.value.shape[axis]

        def backward(g: np.ndarray) -> None:
            a._accumulate(np.broadcast_to(g, a.value.shape) / count)

        out._backward = backward
    return out


def take_rows(e: Tensor, ids) -> Tensor:
    """Gather rows of an embedding matrix; backward scatter-adds."""
    idx = np.asarray(ids, dtype=np.int64)
    out = Tensor(e.value[idx], (e,))
    if _GRAD_ENABLED:
        def backward(g: np.ndarray) -> None:
            acc = np.zeros_like(e.value)
            np.add.at(acc, idx, g)
            e._accumulate(acc)
        out._backward = backward
    return out


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(a.value[:, lo:hi], (a,))
    if _GRAD_ENABLED:
        def backward(g: np.ndarray) -> None:
            acc = np.zeros_like(a.value)
            acc[:, lo:hi] = g
            a._accumulate(acc)
        out._backward = backward
    return out


def slice_rows(a: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(a.value[lo:hi, :], (a,))
    if _GRAD_ENABLED:
        def backward(g: np.ndarray) -> None:
            acc = np.zeros_like(a.value)
            acc[lo:hi, :] = g
            a._accumulate(acc)
        out._backward = backward
    return out


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts))
    if _GRAD_ENABLED:
        widths = [p.value.shape[1] for p in parts]

        def backward(g: np.ndarray) -> None:
            offset = 0
            for p, w in zip(parts, widths):
                p._accumulate(g[:, offset:offset + w])
                offset += w
        out._backward = backward
    return out


def dropout_mask(shape: tuple[int, int], rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-scaling dropout mask: 0 with probability rate, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        rng.random(shape)  # keep the stream position independent of the rate
        return np.ones(shape, dtype=np.float64)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


_BCE_CLAMP = 1e-12


def bce_loss(score: float, label: int) -> float:
    """Binary cross-entropy on a probability score, clamped away from {0, 1}."""
    p = min(max(float(score), _BCE_CLAMP), 1.0 - _BCE_CLAMP)
    y = float(label)
    return -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))


def bce_with_logit(z: Tensor, label: int) -> Tensor:
    """BCE evaluated from the pre-sigmoid logit; gradient is sigmoid(z) - y."""
    y = float(label)
    zv = z.value
    value = np.logaddexp(0.0, -zv) if y == 1.0 else np.logaddexp(0.0, zv)
    out = Tensor(value, (z,))
    if _GRAD_ENABLED:
        out._backward = lambda g: z._accumulate(g * (_sigmoid_array(zv) - y))
    return out


def mean_of(losses: Sequence[Tensor]) -> Tensor:
    """Arithmetic mean of scalar tensors (the batch loss reduction)."""
    total = losses[0]
    for l in losses[1:]:
        total = add(total, l)
    return mul(total, 1.0 / len(losses))


def grad_check(fn: Callable[[], Tensor], tensors: Iterable[Tensor], h: float = 1e-5) -> float:
    """Compare recorded gradients of fn() against central finite differences.

    fn must rebuild the scalar loss from the given tensors' current values on
    every call. Returns the max relative error over all components, with the
    denominator floored at 1e-6 so near-zero gradient pairs compare absolutely.
    """
    tensors = list(tensors)
    loss = fn()
    for t in tensors:
        t.grad = None
    loss.backward()
    recorded = [np.zeros_like(t.value) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, rec in zip(tensors, recorded):
        flat = t.value.reshape(-1)
        rflat = rec.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn().item()
            flat[i] = orig - h
            f_minus = fn().item()
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(fd), abs(rflat[i]), 1e-6)
            worst = max(worst, abs(fd - rflat[i]) / denom)
    return worst
