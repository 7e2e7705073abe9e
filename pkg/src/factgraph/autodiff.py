"""Dense 2-D float64 tensors with tape-based reverse-mode differentiation.

Just enough machinery for the relational GCN: matmul, add, scaling, relu,
row gather/scatter, and a fused softmax cross-entropy. Every op validates
shapes and finiteness; the tape replays recorded backward closures in strict
reverse order. Matrices are immutable values once created.
"""

from __future__ import annotations

import numpy as np

from .errors import NonFiniteValue, ShapeMismatch


class Var:
    """A matrix value plus its accumulated gradient."""

    __slots__ = ("data", "grad")

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeMismatch(f"expected 2-D data, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeMismatch(f"item() on shape {self.shape}")
        return float(self.data[0, 0])


class Tape:
    """Ordered log of backward closures for one forward pass."""

    def __init__(self):
        self._ops: list = []

    def record(self, fn) -> None:
        self._ops.append(fn)

    def __len__(self) -> int:
        return len(self._ops)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"non-finite value produced by {op}")


def _accum(v: Var, g: np.ndarray) -> None:
    if v.grad is None:
        v.grad = np.zeros_like(v.data)
    v.grad += g


def _out(tape: Tape | None, data: np.ndarray, op: str, backward=None) -> Var:
    _check_finite(data, op)
    result = Var(data)
    if tape is not None and backward is not None:
        tape.record(lambda: backward(result.grad) if result.grad is not None else None)
    return result


def matmul(tape: Tape | None, a: Var, b: Var) -> Var:
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} x {b.shape}")

    def backward(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    return _out(tape, a.data @ b.data, "matmul", backward)


def add(tape: Tape | None, a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")

    def backward(g):
        _accum(a, g)
        _accum(b, g)

    return _out(tape, a.data + b.data, "add", backward)


def bias_add(tape: Tape | None, a: Var, bias: Var) -> Var:
    """Add a (1, n) row vector to every row of a."""
    if bias.shape != (1, a.shape[1]):
        raise ShapeMismatch(f"bias_add {a.shape} + {bias.shape}")

    def backward(g):
        _accum(a, g)
        _accum(bias, g.sum(axis=0, keepdims=True))

    return _out(tape, a.data + bias.data, "bias_add", backward)


def scale(tape: Tape | None, a: Var, c: float) -> Var:
    if not np.isfinite(c):
        raise NonFiniteValue("scale by non-finite constant")

    def backward(g):
        _accum(a, c * g)

    return _out(tape, c * a.data, "scale", backward)


def mul(tape: Tape | None, a: Var, b: Var) -> Var:
    if a.shape != b.shape:
        raise ShapeMismatch(f"mul {a.shape} * {b.shape}")

    def backward(g):
        _accum(a, g * b.data)
        _accum(b, g * a.data)

    return _out(tape, a.data * b.data, "mul", backward)


def scalar_mul(tape: Tape | None, a: Var, s: Var) -> Var:
    """Multiply a matrix by a trainable (1, 1) scalar."""
    if s.shape != (1, 1):
        raise ShapeMismatch(f"scalar_mul expects (1,1) scalar, got {s.shape}")

    def backward(g):
        _accum(a, g * s.data[0, 0])
        _accum(s, np.array([[(g * a.data).sum()]]))

    return _out(tape, a.data * s.data[0, 0], "scalar_mul", backward)


def relu(tape: Tape | None, a: Var) -> Var:
    mask = a.data > 0

    def backward(g):
        _accum(a, g * mask)

    return _out(tape, np.where(mask, a.data, 0.0), "relu", backward)


def gather_rows(tape: Tape | None, a: Var, idx: np.ndarray) -> Var:
    idx = np.asarray(idx, dtype=np.intp)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ShapeMismatch("gather index out of range")

    def backward(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        np.add.at(a.grad, idx, g)

    return _out(tape, a.data[idx], "gather_rows", backward)


def scatter_sum(tape: Tape | None, a: Var, idx: np.ndarray, num_rows: int) -> Var:
    """Sum rows of a into slots given by idx; accumulation order follows idx order."""
    idx = np.asarray(idx, dtype=np.intp)
    if idx.shape[0] != a.shape[0]:
        raise ShapeMismatch("scatter index length != row count")
    if idx.size and (idx.min() < 0 or idx.max() >= num_rows):
        raise ShapeMismatch("scatter index out of range")
    out = np.zeros((num_rows, a.shape[1]))
    np.add.at(out, idx, a.data)

    def backward(g):
        _accum(a, g[idx])

    return _out(tape, out, "scatter_sum", backward)


def row_scale(tape: Tape | None, a: Var, coeffs: np.ndarray) -> Var:
    """Multiply each row by a fixed coefficient (no gradient through coeffs)."""
    coeffs = np.asarray(coeffs, dtype=np.float64).reshape(-1, 1)
    if coeffs.shape[0] != a.shape[0]:
        raise ShapeMismatch("row_scale coefficient length != row count")
    _check_finite(coeffs, "row_scale coeffs")

    def backward(g):
        _accum(a, g * coeffs)

    return _out(tape, a.data * coeffs, "row_scale", backward)


def sum_all(tape: Tape | None, a: Var) -> Var:
    def backward(g):
        _accum(a, np.full_like(a.data, g[0, 0]))

    return _out(tape, np.array([[a.data.sum()]]), "sum_all", backward)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Stable softmax (max-subtracted). Plain ndarray in, ndarray out."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NonFiniteValue("softmax on non-finite input")
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(tape: Tape | None, logits: Var, labels: np.ndarray) -> Var:
    """Mean cross-entropy between row-wise softmax(logits) and integer labels."""
    labels = np.asarray(labels, dtype=np.intp)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"labels shape {labels.shape} for logits {logits.shape}")
    if n == 0:
        raise ShapeMismatch("cross-entropy over zero rows")
    if labels.min() < 0 or labels.max() >= c:
        raise ShapeMismatch("label id out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = -log_probs[np.arange(n), labels].mean()

    def backward(g):
        probs = np.exp(log_probs)
        probs[np.arange(n), labels] -= 1.0
        _accum(logits, (g[0, 0] / n) * probs)

    return _out(tape, np.array([[loss]]), "softmax_cross_entropy", backward)


def backward(tape: Tape, loss: Var) -> None:
    """Seed d(loss)/d(loss)=1 and replay the tape in reverse."""
    if loss.data.shape != (1, 1):
        raise ShapeMismatch("backward needs a scalar loss")
    if len(tape) == 0:
        raise ShapeMismatch("backward on an empty tape")
    loss.grad = np.ones((1, 1))
    for fn in reversed(tape._ops):
        fn()
