"""Tests for satatree.model.cells."""

import numpy as np
import pytest

from satatree.errors import DimensionError
from satatree.model import (
    CellState,
    LeafLstmParams,
    PlainTreeCellParams,
    TagTreeCellParams,
    WordTreeCellParams,
    leaf_lstm_step,
    sata_candidate,
    sata_compose,
    tag_internal_step,
    tag_leaf_step,
    tree_lstm_step,
)
from satatree.model.cells import FcLeafParams, fc_leaf_step
from satatree.numeric import Tensor


def _zeros(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape))


def _state(h, c) -> CellState:
    return CellState(Tensor(np.asarray(h, dtype=float)), Tensor(np.asarray(c, dtype=float)))


def _random(rng, *shape: int) -> Tensor:
    return Tensor(rng.normal(0.0, 0.5, size=shape))


def _word_cell(rng, d_h: int, d_T: int) -> WordTreeCellParams:
    return WordTreeCellParams(_random(rng, d_h, 2 * d_h), _random(rng, d_h), _random(rng, 4 * d_h, 2 * d_h + d_T), _random(rng, 4 * d_h))


def test_tree_lstm_with_zero_weights():
    cell = PlainTreeCellParams(_zeros(10, 4), _zeros(10))
    out = tree_lstm_step(_state([0, 0], [1, 1]), _state([0, 0], [1, 1]), cell)
    np.testing.assert_allclose(out.c.data, [1.0, 1.0])
    np.testing.assert_allclose(out.h.data, 0.5 * np.tanh(1.0))


def test_tree_lstm_rejects_wrong_child_width():
    cell = PlainTreeCellParams(_zeros(10, 4), _zeros(10))
    with pytest.raises(DimensionError, match="cell expects 2"):
        tree_lstm_step(_state([0, 0, 0], [0, 0, 0]), _state([0, 0], [0, 0]), cell)


def test_tag_leaf_step_splits_c_then_h():
    d = 2
    U = Tensor(np.zeros((2 * d, d)))
    a = Tensor(np.array([0.1, 0.2, 0.3, 0.4]))
    cell = TagTreeCellParams(U, a, _zeros(5 * d, 3 * d), _zeros(5 * d))
    out = tag_leaf_step(Tensor(np.ones(d)), cell)
    np.testing.assert_allclose(out.c.data, np.tanh([0.1, 0.2]))
    np.testing.assert_allclose(out.h.data, np.tanh([0.3, 0.4]))


def test_tag_internal_step_with_zero_weights():
    d = 2
    cell = TagTreeCellParams(_zeros(2 * d, d), _zeros(2 * d), _zeros(5 * d, 3 * d), _zeros(5 * d))
    out = tag_internal_step(_state([0, 0], [0.2, 0.2]), _state([0, 0], [0.4, 0.4]), _zeros(d), cell)
    np.testing.assert_allclose(out.c.data, [0.3, 0.3])


def test_tag_cell_shapes_are_validated():
    with pytest.raises(DimensionError, match="W_T"):
        TagTreeCellParams(_zeros(4, 2), _zeros(4), _zeros(10, 4), _zeros(10))


def test_leaf_lstm_step_from_zero_state():
    d_h, d_w = 2, 3
    cell = LeafLstmParams(_zeros(4 * d_h, d_h + d_w), _zeros(4 * d_h))
    out = leaf_lstm_step(_state([0, 0], [0, 0]), Tensor(np.ones(d_w)), cell)
    np.testing.assert_allclose(out.c.data, 0.0)
    assert cell.d_w == d_w


def test_leaf_lstm_rejects_wrong_input_width():
    cell = LeafLstmParams(_zeros(8, 5), _zeros(8))
    with pytest.raises(DimensionError, match="x has shape"):
        leaf_lstm_step(_state([0, 0], [0, 0]), _zeros(4), cell)


def test_fc_leaf_step():
    cell = FcLeafParams(_zeros(4, 3), Tensor(np.array([1.0, 2.0, 3.0, 4.0])))
    out = fc_leaf_step(_zeros(3), cell)
    np.testing.assert_allclose(out.c.data, np.tanh([1.0, 2.0]))
    np.testing.assert_allclose(out.h.data, np.tanh([3.0, 4.0]))


def test_tag_input_moves_gates_but_not_candidate():
    rng = np.random.default_rng(0)
    cell = _word_cell(rng, 3, 2)
    left = _state(rng.normal(size=3), rng.normal(size=3))
    right = _state(rng.normal(size=3), rng.normal(size=3))
    candidate = sata_candidate(left, right, cell)
    first = sata_compose(left, right, Tensor(np.array([1.0, -1.0])), cell)
    second = sata_compose(left, right, Tensor(np.array([-2.0, 0.5])), cell, candidate)
    assert not np.allclose(first.h.data, second.h.data)
    reused = sata_compose(left, right, Tensor(np.array([1.0, -1.0])), cell, candidate)
    np.testing.assert_array_equal(reused.h.data, first.h.data)


def test_compose_matches_hand_computation():
    rng = np.random.default_rng(1)
    d_h, d_T = 2, 2
    cell = _word_cell(rng, d_h, d_T)
    left = _state(rng.normal(size=d_h), rng.normal(size=d_h))
    right = _state(rng.normal(size=d_h), rng.normal(size=d_h))
    tag_h = rng.normal(size=d_T)

    out = sata_compose(left, right, Tensor(tag_h), cell)

    hh = np.concatenate([left.h.data, right.h.data])
    g = np.tanh(cell.U_w.data @ hh + cell.a_w.data)
    z = cell.W_w.data @ np.concatenate([hh, tag_h]) + cell.b_w.data
    i, f_l, f_r, o = (1 / (1 + np.exp(-z[k * d_h : (k + 1) * d_h])) for k in range(4))
    c = f_l * left.c.data + f_r * right.c.data + i * g
    np.testing.assert_allclose(out.c.data, c, rtol=1e-12)
    np.testing.assert_allclose(out.h.data, o * np.tanh(c), rtol=1e-12)


def test_compose_without_tag_columns():
    rng = np.random.default_rng(2)
    cell = _word_cell(rng, 2, 0)
    assert cell.d_T == 0
    left, right = _state([0.1, 0.2], [0.0, 0.1]), _state([0.3, -0.1], [0.2, 0.0])
    assert sata_compose(left, right, None, cell).dim == 2


def test_compose_requires_tag_state_when_cell_has_tag_columns():
    cell = _word_cell(np.random.default_rng(3), 2, 2)
    state = _state([0, 0], [0, 0])
    with pytest.raises(DimensionError, match="no tag state"):
        sata_compose(state, state, None, cell)
    with pytest.raises(DimensionError, match="tag state has shape"):
        sata_compose(state, state, _zeros(3), cell)


def test_cell_state_must_be_matching_vectors():
    with pytest.raises(DimensionError):
        CellState(_zeros(2), _zeros(3))
