"""Reverse-mode automatic differentiation over float64 numpy arrays.

Small tape-based engine: each op returns a Tensor holding the forward value
and a closure that maps the output gradient to parent gradients.  backward()
walks the tape in reverse topological order.

Determinism contract: all reductions with data-dependent iteration order
(segment sums, softmax denominators) accumulate in a canonical order sorted
by (segment, value), so the result is bit-identical under any permutation of
the input rows.  Matrix products offer a `canonical` flag that switches from
BLAS to einsum, whose summation kernel is uniform per output row; inference
paths use it, training paths keep the faster BLAS route.
"""
from __future__ import annotations

import numpy as np


class Tensor:
    """A float64 array plus the tape bookkeeping needed for backward()."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is None or node.grad is None:
                continue
            for parent, grad in zip(node._parents, node._backward(node.grad)):
                if grad is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += grad

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor(out, _parents=(a, b), _backward=backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return Tensor(out, _parents=(a, b), _backward=backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out, _parents=(a, b), _backward=backward)


def matmul(a, b, canonical=False) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")

    def dot(x, y):
        if canonical:
            return np.einsum("ij,jk->ik", x, y)
        return x @ y

    out = dot(a.data, b.data)

    def backward(g):
        return dot(g, b.data.T), dot(a.data.T, g)

    return Tensor(out, _parents=(a, b), _backward=backward)


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0

    def backward(g):
        return (g * mask,)

    return Tensor(np.where(mask, a.data, 0.0), _parents=(a,), _backward=backward)


def leaky_relu(a, slope=0.2) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0.0

    def backward(g):
        return (g * np.where(mask, 1.0, slope),)

    return Tensor(np.where(mask, a.data, slope * a.data),
                  _parents=(a,), _backward=backward)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        return (g * out * (1.0 - out),)

    return Tensor(out, _parents=(a,), _backward=backward)


def log(a) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        return (g / a.data,)

    return Tensor(np.log(a.data), _parents=(a,), _backward=backward)


def clamp(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data > lo) & (a.data < hi)

    def backward(g):
        return (g * inside,)

    return Tensor(np.clip(a.data, lo, hi), _parents=(a,), _backward=backward)


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    n = a.data.size

    def backward(g):
        return (np.full_like(a.data, float(g) / n),)

    return Tensor(a.data.mean(), _parents=(a,), _backward=backward)


def gather_rows(a, idx) -> Tensor:
    """out[e] = a[idx[e]]; backward scatter-adds into the source rows."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)

    def backward(g):
        grad = np.zeros_like(a.data)
        np.add.at(grad, idx, g)
        return (grad,)

    return Tensor(a.data[idx], _parents=(a,), _backward=backward)


def concat_cols(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    na = a.data.shape[1]

    def backward(g):
        return g[:, :na], g[:, na:]

    return Tensor(np.concatenate([a.data, b.data], axis=1),
                  _parents=(a, b), _backward=backward)


def _canonical_order(seg: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Sort rows by (segment, value columns): accumulation order is then a
    function of the multiset of rows only, never of their input order."""
    if values.ndim == 1:
        values = values[:, None]
    keys = [values[:, k] for k in range(values.shape[1] - 1, -1, -1)]
    keys.append(seg)
    return np.lexsort(keys)


def _segment_add(values: np.ndarray, seg: np.ndarray, num: int) -> np.ndarray:
    out_shape = (num,) + values.shape[1:]
    out = np.zeros(out_shape, dtype=np.float64)
    order = _canonical_order(seg, values)
    np.add.at(out, seg[order], values[order])
    return out


def segment_sum(a, seg, num: int) -> Tensor:
    """out[s] = sum of a's rows with seg == s, canonically ordered."""
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.intp)

    def backward(g):
        return (g[seg],)

    return Tensor(_segment_add(a.data, seg, num), _parents=(a,), _backward=backward)


def segment_mean(a, seg, num: int) -> Tensor:
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.intp)
    counts = np.bincount(seg, minlength=num).astype(np.float64)
    scale = 1.0 / np.maximum(counts, 1.0)
    shape = (num,) + (1,) * (a.data.ndim - 1)

    def backward(g):
        return ((g * scale.reshape(shape))[seg],)

    return Tensor(_segment_add(a.data, seg, num) * scale.reshape(shape),
                  _parents=(a,), _backward=backward)


def segment_max(a, seg, num: int) -> Tensor:
    """Per-segment elementwise max; gradient routes to the first row (in
    input order) attaining the max within its segment."""
    a = as_tensor(a)
    seg = np.asarray(seg, dtype=np.intp)
    values = a.data if a.data.ndim > 1 else a.data[:, None]
    width = values.shape[1]
    out = np.full((num, width), -np.inf)
    np.maximum.at(out, seg, values)
    winner = np.full((num, width), -1, dtype=np.intp)
    for row in range(values.shape[0]):
        s = seg[row]
        take = (values[row] == out[s]) & (winner[s] == -1)
        winner[s][take] = row
    out = np.where(np.isneginf(out), 0.0, out)

    def backward(g):
        g2 = g if g.ndim > 1 else g[:, None]
        grad = np.zeros_like(values)
        for s in range(num):
            cols = np.nonzero(winner[s] >= 0)[0]
            grad[winner[s][cols], cols] += g2[s][cols]
        return (grad.reshape(a.data.shape),)

    return Tensor(out.reshape((num,) + a.data.shape[1:]),
                  _parents=(a,), _backward=backward)


def segment_softmax(logits, seg, num: int) -> Tensor:
    """Softmax over rows sharing a segment id (numerically stabilized)."""
    a = as_tensor(logits)
    seg = np.asarray(seg, dtype=np.intp)
    flat = a.data.reshape(-1)
    high = np.full(num, -np.inf)
    np.maximum.at(high, seg, flat)
    z = np.exp(flat - high[seg])
    denom = _segment_add(z, seg, num).reshape(-1)
    probs = z / denom[seg]

    def backward(g):
        gf = g.reshape(-1)
        inner = _segment_add(probs * gf, seg, num).reshape(-1)
        return ((probs * (gf - inner[seg])).reshape(a.data.shape),)

    return Tensor(probs.reshape(a.data.shape), _parents=(a,), _backward=backward)
