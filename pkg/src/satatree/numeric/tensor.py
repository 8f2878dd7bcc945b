"""
Dense tensors with tape-based (define-by-run) reverse-mode differentiation.

Every op computes its value with numpy, checks it is finite, and, when a tape is active and any
input requires a gradient, records a TapeNode holding its inputs and a vector-Jacobian product
closure over the activations it saved. Tapes are confined to the thread (or context) that opened
them, so data-parallel workers each differentiate on a private tape.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from satatree.errors import DimensionError, GradientError, NonFiniteError

_ACTIVE_TAPE: ContextVar[Tape | None] = ContextVar("satatree_active_tape", default=None)


@dataclass(eq=False)
class Parameter:
    """A named trainable array together with its accumulated gradient."""

    name: str
    value: np.ndarray
    trainable: bool = True
    decay: bool = True
    grad: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.value = np.ascontiguousarray(self.value)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def tensor(self) -> Tensor:
        return Tensor(self.value, requires_grad=self.trainable, source=self)

    def zero_grad(self) -> None:
        self.grad.fill(0.0)


class Tensor:
    """Immutable dense array node. ``source`` is set for leaves that view a Parameter."""

    __slots__ = ("data", "requires_grad", "node", "source")

    def __init__(
        self,
        data: Any,
        requires_grad: bool = False,
        node: TapeNode | None = None,
        source: Parameter | None = None,
    ) -> None:
        array = np.asarray(data)
        if not np.issubdtype(array.dtype, np.floating):
            array = array.astype(np.float64)
        self.data = array
        self.requires_grad = requires_grad
        self.node = node
        self.source = source

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.size != 1:
            raise DimensionError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, other: Tensor) -> Tensor:
        return hadamard(self, other)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __neg__(self) -> Tensor:
        return scale(self, -1.0)


@dataclass
class RowGrad:
    """Sparse gradient touching only some rows of a parameter matrix."""

    rows: np.ndarray
    values: np.ndarray

    def add_to(self, target: np.ndarray) -> None:
        np.add.at(target, self.rows, self.values)

    def dense(self, shape: tuple[int, ...], dtype: Any) -> np.ndarray:
        out = np.zeros(shape, dtype=dtype)
        self.add_to(out)
        return out


GradValue = np.ndarray | RowGrad
VJP = Callable[[np.ndarray], Sequence[GradValue | None]]


@dataclass(eq=False)
class TapeNode:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: VJP
    owner: Tape


class Tape:
    """Records ops while active (``with Tape() as tape:``) and runs the backward sweep."""

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._tokens: list[Token] = []

    def __enter__(self) -> Tape:
        self._tokens.append(_ACTIVE_TAPE.set(self))
        return self

    def __exit__(self, *exc: object) -> None:
        _ACTIVE_TAPE.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, node: TapeNode) -> None:
        self.nodes.append(node)

    def gradients(self, loss: Tensor) -> dict[Parameter, GradValue]:
        """Return d(loss)/d(parameter) for every trainable parameter reachable from ``loss``."""

        if loss.size != 1:
            raise GradientError(f"backward needs a scalar loss, got shape {loss.shape}")
        if loss.node is None or loss.node.owner is not self:
            raise GradientError("loss was not recorded on this tape")

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        out: dict[Parameter, GradValue] = {}

        # Recording order is a topological order, so the reverse visits each node once, after
        # every consumer of its output has contributed.
        for node in reversed(self.nodes):
            grad = pending.pop(id(node.output), None)
            if grad is None:
                continue
            for tensor, contribution in zip(node.inputs, node.vjp(grad)):
                if contribution is None or not tensor.requires_grad:
                    continue
                if tensor.source is not None:
                    out[tensor.source] = _merge(out.get(tensor.source), contribution, tensor.source)
                elif tensor.node is not None:
                    if isinstance(contribution, RowGrad):
                        contribution = contribution.dense(tensor.shape, tensor.data.dtype)
                    previous = pending.get(id(tensor))
                    pending[id(tensor)] = contribution if previous is None else previous + contribution
        return out

    def backward(self, loss: Tensor) -> None:
        """Accumulate gradients of ``loss`` into ``Parameter.grad``."""

        accumulate(self.gradients(loss))


def _merge(current: GradValue | None, new: GradValue, param: Parameter) -> GradValue:
    if current is None:
        return new
    if isinstance(current, RowGrad) and isinstance(new, RowGrad):
        return RowGrad(
            np.concatenate([current.rows, new.rows]),
            np.concatenate([current.values, new.values]),
        )
    if isinstance(current, RowGrad):
        current = current.dense(param.shape, param.value.dtype)
    if isinstance(new, RowGrad):
        new.add_to(current)
        return current
    return current + new


def accumulate(grads: dict[Parameter, GradValue]) -> None:
    for param, grad in grads.items():
        if isinstance(grad, RowGrad):
            grad.add_to(param.grad)
        else:
            param.grad += grad


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def as_tensor(value: Any, dtype: Any = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype or np.float64))


def _check_finite(op: str, data: np.ndarray) -> None:
    if not np.isfinite(data).all():
        where = tuple(int(i) for i in np.argwhere(~np.isfinite(data))[0])
        raise NonFiniteError(f"{op} produced a non-finite value at {where}", op, where)


def _emit(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], vjp: VJP) -> Tensor:
    _check_finite(op, data)
    tape = _ACTIVE_TAPE.get()
    needs_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        assert tape is not None
        out.node = TapeNode(op, inputs, out, vjp, tape)
        tape.record(out.node)
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix (or matrix-vector) product. Operands are at most 2-D."""

    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise DimensionError(f"matmul: operands must be 1-D or 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions differ, {a.shape} vs {b.shape}")

    a_data, b_data = a.data, b.data

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if a_data.ndim == 2 and b_data.ndim == 2:
            return g @ b_data.T, a_data.T @ g
        if a_data.ndim == 2:
            return np.outer(g, b_data), a_data.T @ g
        if b_data.ndim == 2:
            return b_data @ g, np.outer(a_data, g)
        return g * b_data, g * a_data

    return _emit("matmul", a_data @ b_data, (a, b), vjp)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got {x.shape}")
    return _emit("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def _bias_compatible(a: Tensor, b: Tensor) -> bool:
    return a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum. A 1-D ``b`` may be added to every row of a 2-D ``a`` (bias)."""

    if _bias_compatible(a, b):
        return _emit("add", a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    _same_shape("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    if _bias_compatible(a, b):
        return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g.sum(axis=0)))
    _same_shape("sub", a, b)
    return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("hadamard", a, b)
    a_data, b_data = a.data, b.data
    return _emit("hadamard", a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


def scale(x: Tensor, factor: float) -> Tensor:
    return _emit("scale", x.data * factor, (x,), lambda g: (g * factor,))


def abs_(x: Tensor) -> Tensor:
    # sign(0) == 0 gives the zero subgradient at the kink.
    sign = np.sign(x.data)
    return _emit("abs", np.abs(x.data), (x,), lambda g: (g * sign,))


# ---------------------------------------------------------------------------
# Nonlinearities
# ---------------------------------------------------------------------------


def sigmoid(x: Tensor) -> Tensor:
    # tanh form never overflows, unlike 1 / (1 + exp(-x)).
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _emit("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh_(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _emit("tanh", t, (x,), lambda g: (g * (1.0 - t * t),))


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _emit("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def _softmax(data: np.ndarray) -> np.ndarray:
    shifted = np.exp(data - data.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis."""

    s = _softmax(x.data)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _emit("softmax", s, (x,), vjp)


def log_softmax(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _emit("log_softmax", out, (x,), vjp)


# ---------------------------------------------------------------------------
# Structural ops
# ---------------------------------------------------------------------------


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last axis."""

    if not parts:
        raise DimensionError("concat: nothing to concatenate")
    leading = parts[0].shape[:-1]
    for p in parts:
        if p.ndim == 0 or p.shape[:-1] != leading:
            raise DimensionError(f"concat: incompatible shapes {[q.shape for q in parts]}")
    bounds = np.cumsum([p.shape[-1] for p in parts])[:-1]

    def vjp(g: np.ndarray) -> list[np.ndarray]:
        return np.split(g, bounds, axis=-1)

    return _emit("concat", np.concatenate([p.data for p in parts], axis=-1), tuple(parts), vjp)


def slice_(x: Tensor, start: int, stop: int) -> Tensor:
    """Half-open slice [start, stop) of the last axis."""

    width = x.shape[-1]
    if not 0 <= start < stop <= width:
        raise DimensionError(f"slice: range {start}..{stop} out of bounds for {x.shape}")
    shape, dtype = x.shape, x.data.dtype

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(shape, dtype=dtype)
        full[..., start:stop] = g
        return (full,)

    return _emit("slice", x.data[..., start:stop].copy(), (x,), vjp)


def split(x: Tensor, pieces: int) -> list[Tensor]:
    """Split the last axis into ``pieces`` equal blocks, in order."""

    width = x.shape[-1]
    if width % pieces:
        raise DimensionError(f"split: {width} is not divisible into {pieces} blocks")
    step = width // pieces
    return [slice_(x, k * step, (k + 1) * step) for k in range(pieces)]


def stack(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix (one row each)."""

    if not rows:
        raise DimensionError("stack: nothing to stack")
    for r in rows:
        if r.ndim != 1 or r.shape != rows[0].shape:
            raise DimensionError(f"stack: incompatible shapes {[q.shape for q in rows]}")
    return _emit("stack", np.stack([r.data for r in rows]), tuple(rows), lambda g: list(g))


def sum_(x: Tensor) -> Tensor:
    shape = x.shape
    return _emit("sum", np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, g),))


def mean(x: Tensor) -> Tensor:
    shape, n = x.shape, x.size
    return _emit("mean", np.asarray(x.data.mean()), (x,), lambda g: (np.full(shape, g / n),))


def pick(x: Tensor, indices: Iterable[int]) -> Tensor:
    """Per-row selection: out[i] = x[i, indices[i]]."""

    idx = np.asarray(list(indices), dtype=np.int64)
    if x.ndim != 2 or idx.shape != (x.shape[0],):
        raise DimensionError(f"pick: need one index per row of {x.shape}, got {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[1]):
        raise DimensionError(f"pick: index out of range for {x.shape[1]} columns")
    rows = np.arange(x.shape[0])
    shape, dtype = x.shape, x.data.dtype

    def vjp(g: np.ndarray) -> tuple[np.ndarray]:
        full = np.zeros(shape, dtype=dtype)
        full[rows, idx] = g
        return (full,)

    return _emit("pick", x.data[rows, idx], (x,), vjp)


def take_rows(table: Tensor, ids: int | Sequence[int]) -> Tensor:
    """Gather rows of a parameter matrix. A scalar id returns a single row vector."""

    if table.ndim != 2:
        raise DimensionError(f"take_rows: expected a matrix, got {table.shape}")
    idx = np.asarray(ids, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise DimensionError(f"take_rows: id out of range for {table.shape[0]} rows")

    def vjp(g: np.ndarray) -> tuple[RowGrad]:
        return (RowGrad(idx.reshape(-1), g.reshape(-1, table.shape[1])),)

    return _emit("take_rows", table.data[idx].copy(), (table,), vjp)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0."""

    if rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return _emit("dropout", x.data * keep, (x,), lambda g: (g * keep,))


def batch_norm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    eps: float = 1e-5,
) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Normalise each column of ``x`` (rows are examples), then scale and shift.

    Train mode uses the batch statistics, eval mode the running ones. Returns the output together
    with the statistics used, so the caller can update running estimates.
    """

    if x.ndim != 2 or gamma.shape != (x.shape[1],) or beta.shape != gamma.shape:
        raise DimensionError(f"batch_norm: {x.shape} with gamma {gamma.shape}")

    if train:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x.data - mu) * inv_std
    g_data = gamma.data
    n = x.shape[0]

    def vjp(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d_hat = g * g_data
        if train:
            dx = inv_std / n * (n * d_hat - d_hat.sum(axis=0) - x_hat * (d_hat * x_hat).sum(axis=0))
        else:
            dx = d_hat * inv_std
        return dx, (g * x_hat).sum(axis=0), g.sum(axis=0)

    out = _emit("batch_norm", x_hat * g_data + beta.data, (x, gamma, beta), vjp)
    return out, mu, var


__all__ = [
    "Parameter",
    "RowGrad",
    "Tape",
    "TapeNode",
    "Tensor",
    "abs_",
    "accumulate",
    "active_tape",
    "add",
    "as_tensor",
    "batch_norm",
    "concat",
    "dropout",
    "hadamard",
    "log_softmax",
    "matmul",
    "mean",
    "pick",
    "relu",
    "scale",
    "sigmoid",
    "slice_",
    "softmax",
    "split",
    "stack",
    "sub",
    "sum_",
    "take_rows",
    "tanh_",
    "transpose",
]
