"""Dense float64 tensors with reverse-mode automatic differentiation.

The engine is deliberately small. Shapes are explicit: binary elementwise ops
require identical shapes, and the only implicit broadcast is scalar-with-tensor.
Executed ops are recorded on a thread-local tape; backward() replays the tape
once in reverse and then clears it. Non-smooth points use fixed conventions so
gradients stay deterministic: relu'(0) = 0, abs'(0) = 0, clamp passes gradient
only strictly inside the interval, max-pool ties route to the first index.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class SequenceTooShortError(ValueError):
    """Sequence axis is shorter than the convolution window."""


class Tensor:
    """Dense n-dimensional float64 array, optionally tracked for gradients.

    ``data`` is treated as immutable once constructed (the optimizer rebinds
    it between batches); ``grad`` is the only mutated slot and is populated
    by :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data)

    def sum(self) -> "Tensor":
        return sum_all(self)

    def reshape(self, shape) -> "Tensor":
        return reshape(self, shape)

    def backward(self) -> None:
        backward(self)

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


class Tape:
    """Ordered record of executed operations for one thread.

    Each record pairs an op's output with a pull closure that adds the
    output adjoint into the inputs' grads. backward() visits every record
    exactly once, newest first, then clears the tape.
    """

    __slots__ = ("_records",)

    def __init__(self) -> None:
        self._records: list[tuple[Tensor, Callable[[Array], None]]] = []

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, pull: Callable[[Array], None]) -> None:
        self._records.append((out, pull))

    def clear(self) -> None:
        self._records.clear()


_state = threading.local()


def active_tape() -> Tape:
    tape = getattr(_state, "tape", None)
    if tape is None:
        tape = _state.tape = Tape()
    return tape


def grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording (inference mode) for the duration of the block."""
    previous = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tracked tensor contributing to ``loss``.

    ``loss`` must be a scalar connected to the thread's tape. The tape is
    cleared afterwards; leaf grads persist until the caller resets them.
    """
    if loss.shape != ():
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to the gradient tape")
    tape = active_tape()
    loss.grad = np.ones((), dtype=np.float64)
    try:
        for out, pull in reversed(tape._records):
            if out.grad is not None:
                pull(out.grad)
    finally:
        tape.clear()


def _as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return Tensor(np.asarray(value, dtype=np.float64))
    raise TypeError(f"expected Tensor or scalar, got {type(value).__name__}")


def _accumulate(t: Tensor, g: Array) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _tracked(*inputs: Tensor) -> bool:
    return grad_enabled() and any(t.requires_grad for t in inputs)


def _emit(data: Array, pull: Callable[[Array], None]) -> Tensor:
    out = Tensor(data, requires_grad=True)
    active_tape().record(out, pull)
    return out


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float64))


# ---------------------------------------------------------------------------
# elementwise ops: equal shapes, or scalar-with-tensor broadcast


def _check_binary(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise DimensionError(
            f"{name}: shapes {a.shape} and {b.shape} differ (only scalar broadcast is allowed)"
        )


def _reduce_to(g: Array, shape: tuple[int, ...]) -> Array:
    # only the scalar operand can disagree with the output shape
    if g.shape == shape:
        return g
    return np.asarray(g.sum(), dtype=np.float64).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "add")
    data = a.data + b.data
    if not _tracked(a, b):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, _reduce_to(g, a.shape))
        _accumulate(b, _reduce_to(g, b.shape))

    return _emit(data, pull)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "sub")
    data = a.data - b.data
    if not _tracked(a, b):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, _reduce_to(g, a.shape))
        _accumulate(b, _reduce_to(-g, b.shape))

    return _emit(data, pull)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_binary(a, b, "mul")
    data = a.data * b.data
    if not _tracked(a, b):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, _reduce_to(g * b.data, a.shape))
        _accumulate(b, _reduce_to(g * a.data, b.shape))

    return _emit(data, pull)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    data = -a.data
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, -g)

    return _emit(data, pull)


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    # evaluate the numerically safe branch on each side of zero
    with np.errstate(over="ignore", invalid="ignore"):
        ex_neg = np.exp(-np.abs(x))
    data = np.where(x >= 0, 1.0 / (1.0 + ex_neg), ex_neg / (1.0 + ex_neg))
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, g * data * (1.0 - data))

    return _emit(data, pull)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    data = np.tanh(a.data)
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, g * (1.0 - data * data))

    return _emit(data, pull)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)
    if not _tracked(a):
        return Tensor(data)
    mask = a.data > 0  # subgradient at 0 is 0

    def pull(g: Array) -> None:
        _accumulate(a, g * mask)

    return _emit(data, pull)


def log(a) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log requires strictly positive input")
    data = np.log(a.data)
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, g / a.data)

    return _emit(data, pull)


def absolute(a) -> Tensor:
    a = _as_tensor(a)
    data = np.abs(a.data)
    if not _tracked(a):
        return Tensor(data)
    sign = np.sign(a.data)

    def pull(g: Array) -> None:
        _accumulate(a, g * sign)

    return _emit(data, pull)


def clamp(a, lo: float, hi: float) -> Tensor:
    if lo > hi:
        raise ValueError(f"clamp bounds are inverted: [{lo}, {hi}]")
    a = _as_tensor(a)
    data = np.clip(a.data, lo, hi)
    if not _tracked(a):
        return Tensor(data)
    mask = (a.data >= lo) & (a.data <= hi)

    def pull(g: Array) -> None:
        _accumulate(a, g * mask)

    return _emit(data, pull)


# ---------------------------------------------------------------------------
# linear algebra and structure ops


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(f"matmul supports 1-D and 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    data = np.matmul(a.data, b.data)
    if not _tracked(a, b):
        return Tensor(data)
    lhs = a.data if a.ndim == 2 else a.data[np.newaxis, :]
    rhs = b.data if b.ndim == 2 else b.data[:, np.newaxis]

    def pull(g: Array) -> None:
        g2 = g.reshape(lhs.shape[0], rhs.shape[1])
        _accumulate(a, (g2 @ rhs.T).reshape(a.shape))
        _accumulate(b, (lhs.T @ g2).reshape(b.shape))

    return _emit(data, pull)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise DimensionError("concat needs at least one tensor")
    ndim = ts[0].ndim
    if not 0 <= axis < max(ndim, 1):
        raise DimensionError(f"concat: axis {axis} out of range for {ndim}-d tensors")
    for t in ts[1:]:
        if t.ndim != ndim:
            raise DimensionError(f"concat: ranks differ ({ts[0].shape} vs {t.shape})")
        for ax in range(ndim):
            if ax != axis and t.shape[ax] != ts[0].shape[ax]:
                raise DimensionError(f"concat: shapes {ts[0].shape} and {t.shape} differ off axis {axis}")
    data = np.concatenate([t.data for t in ts], axis=axis)
    if not _tracked(*ts):
        return Tensor(data)
    sizes = [t.shape[axis] for t in ts]

    def pull(g: Array) -> None:
        offset = 0
        for t, size in zip(ts, sizes):
            index = [slice(None)] * ndim
            index[axis] = slice(offset, offset + size)
            _accumulate(t, g[tuple(index)])
            offset += size

    return _emit(data, pull)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice of ``length`` entries along ``axis`` (a copy)."""
    a = _as_tensor(a)
    if not 0 <= axis < a.ndim:
        raise DimensionError(f"narrow: axis {axis} out of range for shape {a.shape}")
    if length < 1 or start < 0 or start + length > a.shape[axis]:
        raise DimensionError(f"narrow: window [{start}, {start + length}) outside axis of size {a.shape[axis]}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)
    data = a.data[index].copy()
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        buf = np.zeros_like(a.data)
        buf[index] = g
        _accumulate(a, buf)

    return _emit(data, pull)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view shape {a.shape} as {shape}") from exc
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, g.reshape(a.shape))

    return _emit(data, pull)


def sum_all(a) -> Tensor:
    a = _as_tensor(a)
    data = np.asarray(a.data.sum(), dtype=np.float64)
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, np.broadcast_to(g, a.shape))

    return _emit(data, pull)


def gather_rows(table, indices) -> Tensor:
    """Select rows of a 2-D table; gradients scatter-add back into the rows."""
    table = _as_tensor(table)
    if table.ndim != 2:
        raise DimensionError(f"gather_rows needs a 2-D table, got shape {table.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise DimensionError("gather_rows needs a non-empty 1-D index list")
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise DimensionError(f"gather_rows: index out of range for {table.shape[0]} rows")
    data = table.data[idx]
    if not _tracked(table):
        return Tensor(data)

    def pull(g: Array) -> None:
        buf = np.zeros_like(table.data)
        np.add.at(buf, idx, g)
        _accumulate(table, buf)

    return _emit(data, pull)


def conv1d(a, kernels, bias) -> Tensor:
    """Valid cross-correlation over the first axis.

    ``a`` is (T, C_in), ``kernels`` is (w, C_in, C_out), ``bias`` is (C_out,);
    the output is (T - w + 1, C_out).
    """
    a, kernels, bias = _as_tensor(a), _as_tensor(kernels), _as_tensor(bias)
    if a.ndim != 2 or kernels.ndim != 3 or bias.ndim != 1:
        raise DimensionError(
            f"conv1d expects (T, C_in) input, (w, C_in, C_out) kernels, (C_out,) bias; "
            f"got {a.shape}, {kernels.shape}, {bias.shape}"
        )
    steps, c_in = a.shape
    width, k_in, c_out = kernels.shape
    if k_in != c_in or bias.shape[0] != c_out:
        raise DimensionError(
            f"conv1d: channel mismatch between input {a.shape}, kernels {kernels.shape}, bias {bias.shape}"
        )
    if steps < width:
        raise SequenceTooShortError(f"conv1d: sequence of length {steps} is shorter than kernel width {width}")
    out_steps = steps - width + 1
    data = np.tile(bias.data, (out_steps, 1))
    for k in range(width):
        data += a.data[k : k + out_steps] @ kernels.data[k]
    if not _tracked(a, kernels, bias):
        return Tensor(data)

    def pull(g: Array) -> None:
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            for k in range(width):
                ga[k : k + out_steps] += g @ kernels.data[k].T
            _accumulate(a, ga)
        if kernels.requires_grad:
            gk = np.empty_like(kernels.data)
            for k in range(width):
                gk[k] = a.data[k : k + out_steps].T @ g
            _accumulate(kernels, gk)
        _accumulate(bias, g.sum(axis=0))

    return _emit(data, pull)


def maxpool_over_time(a) -> Tensor:
    """Column-wise maximum of a (T, C) tensor; ties route to the first index."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"maxpool_over_time needs a 2-D tensor, got shape {a.shape}")
    steps, channels = a.shape
    if steps < 1:
        raise DimensionError("maxpool_over_time: empty sequence")
    rows = np.argmax(a.data, axis=0)
    cols = np.arange(channels)
    data = a.data[rows, cols].copy()
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        buf = np.zeros_like(a.data)
        buf[rows, cols] = g
        _accumulate(a, buf)

    return _emit(data, pull)


def softmax(a) -> Tensor:
    """Stable softmax of a 1-D tensor (max-subtracted exponentials)."""
    a = _as_tensor(a)
    if a.ndim != 1 or a.shape[0] < 1:
        raise DimensionError(f"softmax needs a non-empty 1-D tensor, got shape {a.shape}")
    if not np.all(np.isfinite(a.data)):
        raise ValueError("softmax requires finite entries")
    shifted = np.exp(a.data - a.data.max())
    data = shifted / shifted.sum()
    if not _tracked(a):
        return Tensor(data)

    def pull(g: Array) -> None:
        _accumulate(a, data * (g - float(np.dot(g, data))))

    return _emit(data, pull)
