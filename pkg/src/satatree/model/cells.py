"""
Recurrence cells. Each is a pure function of its input states and a parameter view.

Fused gate matrices stack their blocks in a fixed order, which is also the serialized order:

* plain and tag tree-LSTM: (i, f_l, f_r, o, g)
* leaf-LSTM: (i, f, o, g)
* word tree-LSTM gates: (i, f_l, f_r, o); the candidate g has its own affine map
"""

from __future__ import annotations

from dataclasses import dataclass

from satatree.errors import DimensionError
from satatree.numeric import (
    Tensor,
    add,
    concat,
    hadamard,
    matmul,
    sigmoid,
    slice_,
    split,
    tanh_,
)


def _require(name: str, tensor: Tensor, shape: tuple[int, ...]) -> None:
    if tensor.shape != shape:
        raise DimensionError(f"{name} has shape {tensor.shape}, expected {shape}")


@dataclass(frozen=True)
class CellState:
    h: Tensor
    c: Tensor

    def __post_init__(self) -> None:
        if self.h.ndim != 1 or self.h.shape != self.c.shape:
            raise DimensionError(f"cell state h {self.h.shape} and c {self.c.shape} must be equal vectors")

    @property
    def dim(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class PlainTreeCellParams:
    W: Tensor
    b: Tensor

    def __post_init__(self) -> None:
        d = self.b.shape[0] // 5
        _require("W", self.W, (5 * d, 2 * d))
        _require("b", self.b, (5 * d,))

    @property
    def dim(self) -> int:
        return self.b.shape[0] // 5


@dataclass(frozen=True)
class TagTreeCellParams:
    U_T: Tensor
    a_T: Tensor
    W_T: Tensor
    b_T: Tensor

    def __post_init__(self) -> None:
        d = self.a_T.shape[0] // 2
        _require("U_T", self.U_T, (2 * d, d))
        _require("a_T", self.a_T, (2 * d,))
        _require("W_T", self.W_T, (5 * d, 3 * d))
        _require("b_T", self.b_T, (5 * d,))

    @property
    def dim(self) -> int:
        return self.a_T.shape[0] // 2


@dataclass(frozen=True)
class LeafLstmParams:
    W_L: Tensor
    b_L: Tensor

    def __post_init__(self) -> None:
        d_h = self.b_L.shape[0] // 4
        if self.W_L.ndim != 2 or self.W_L.shape[0] != 4 * d_h or self.W_L.shape[1] <= d_h:
            raise DimensionError(f"W_L has shape {self.W_L.shape}, expected ({4 * d_h}, {d_h} + d_w)")
        _require("b_L", self.b_L, (4 * d_h,))

    @property
    def d_h(self) -> int:
        return self.b_L.shape[0] // 4

    @property
    def d_w(self) -> int:
        return self.W_L.shape[1] - self.d_h


@dataclass(frozen=True)
class WordTreeCellParams:
    """Candidate map (U_w, a_w) and gate map (W_w, b_w).

    W_w is 4d_h x (2d_h + d_T), or 4d_h x 2d_h when the cell runs without tag input.
    """

    U_w: Tensor
    a_w: Tensor
    W_w: Tensor
    b_w: Tensor

    def __post_init__(self) -> None:
        d = self.a_w.shape[0]
        _require("U_w", self.U_w, (d, 2 * d))
        _require("b_w", self.b_w, (4 * d,))
        if self.W_w.ndim != 2 or self.W_w.shape[0] != 4 * d or self.W_w.shape[1] < 2 * d:
            raise DimensionError(f"W_w has shape {self.W_w.shape}, expected ({4 * d}, {2 * d} + d_T)")

    @property
    def d_h(self) -> int:
        return self.a_w.shape[0]

    @property
    def d_T(self) -> int:
        return self.W_w.shape[1] - 2 * self.d_h


@dataclass(frozen=True)
class FcLeafParams:
    W_fc: Tensor
    b_fc: Tensor

    def __post_init__(self) -> None:
        if self.W_fc.ndim != 2 or self.W_fc.shape[0] % 2:
            raise DimensionError(f"W_fc has shape {self.W_fc.shape}, expected (2d_h, d_w)")
        _require("b_fc", self.b_fc, (self.W_fc.shape[0],))


def _check_children(left: CellState, right: CellState, d: int) -> None:
    if left.dim != d or right.dim != d:
        raise DimensionError(f"child states have widths {left.dim} and {right.dim}, cell expects {d}")


def tree_lstm_step(left: CellState, right: CellState, p: PlainTreeCellParams) -> CellState:
    _check_children(left, right, p.dim)
    z = add(matmul(p.W, concat([left.h, right.h])), p.b)
    i, f_l, f_r, o, g = split(z, 5)
    c = add(
        add(hadamard(sigmoid(f_l), left.c), hadamard(sigmoid(f_r), right.c)),
        hadamard(sigmoid(i), tanh_(g)),
    )
    return CellState(hadamard(sigmoid(o), tanh_(c)), c)


def tag_leaf_step(e: Tensor, p: TagTreeCellParams) -> CellState:
    """[c; h] = tanh(U_T e + a_T)."""

    _require("tag embedding", e, (p.dim,))
    z = tanh_(add(matmul(p.U_T, e), p.a_T))
    return CellState(h=slice_(z, p.dim, 2 * p.dim), c=slice_(z, 0, p.dim))


def tag_internal_step(left: CellState, right: CellState, e: Tensor, p: TagTreeCellParams) -> CellState:
    _check_children(left, right, p.dim)
    _require("tag embedding", e, (p.dim,))
    z = add(matmul(p.W_T, concat([left.h, right.h, e])), p.b_T)
    i, f_l, f_r, o, g = split(z, 5)
    c = add(
        add(hadamard(sigmoid(f_l), left.c), hadamard(sigmoid(f_r), right.c)),
        hadamard(sigmoid(i), tanh_(g)),
    )
    return CellState(hadamard(sigmoid(o), tanh_(c)), c)


def leaf_lstm_step(prev: CellState, x: Tensor, p: LeafLstmParams) -> CellState:
    if prev.dim != p.d_h:
        raise DimensionError(f"previous state has width {prev.dim}, cell expects {p.d_h}")
    _require("x", x, (p.d_w,))
    z = add(matmul(p.W_L, concat([prev.h, x])), p.b_L)
    i, f, o, g = split(z, 4)
    c = add(hadamard(sigmoid(f), prev.c), hadamard(sigmoid(i), tanh_(g)))
    return CellState(hadamard(sigmoid(o), tanh_(c)), c)


def fc_leaf_step(x: Tensor, p: FcLeafParams) -> CellState:
    """Leaf state straight from the word vector: [c; h] = tanh(W_fc x + b_fc)."""

    d_h = p.b_fc.shape[0] // 2
    z = tanh_(add(matmul(p.W_fc, x), p.b_fc))
    return CellState(h=slice_(z, d_h, 2 * d_h), c=slice_(z, 0, d_h))


def sata_candidate(left: CellState, right: CellState, p: WordTreeCellParams) -> Tensor:
    """The composed candidate tanh(U_w [h_l; h_r] + a_w). Tags never reach it."""

    return tanh_(add(matmul(p.U_w, concat([left.h, right.h])), p.a_w))


def sata_compose(
    left: CellState,
    right: CellState,
    tag_h: Tensor | None,
    p: WordTreeCellParams,
    candidate: Tensor | None = None,
) -> CellState:
    """Word tree-LSTM composition whose gates also see the node's tag representation.

    ``tag_h`` may be None only for a cell built without tag columns. A precomputed ``candidate``
    (from :func:`sata_candidate`) is reused as is.
    """

    _check_children(left, right, p.d_h)
    if tag_h is None:
        if p.d_T:
            raise DimensionError(f"cell has {p.d_T} tag columns but no tag state was given")
        gate_input = concat([left.h, right.h])
    else:
        _require("tag state", tag_h, (p.d_T,))
        gate_input = concat([left.h, right.h, tag_h])

    g = sata_candidate(left, right, p) if candidate is None else candidate
    i, f_l, f_r, o = split(add(matmul(p.W_w, gate_input), p.b_w), 4)
    c = add(
        add(hadamard(sigmoid(f_l), left.c), hadamard(sigmoid(f_r), right.c)),
        hadamard(sigmoid(i), g),
    )
    return CellState(hadamard(sigmoid(o), tanh_(c)), c)


__all__ = [
    "CellState",
    "FcLeafParams",
    "LeafLstmParams",
    "PlainTreeCellParams",
    "TagTreeCellParams",
    "WordTreeCellParams",
    "fc_leaf_step",
    "leaf_lstm_step",
    "sata_candidate",
    "sata_compose",
    "tag_internal_step",
    "tag_leaf_step",
    "tree_lstm_step",
]
