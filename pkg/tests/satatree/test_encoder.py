"""Tests for satatree.model.encoder and satatree.model.params."""

import numpy as np
import pytest

from satatree.config import load_config
from satatree.errors import DimensionError, TransitionError
from satatree.model import (
    CellState,
    EncoderView,
    SataParams,
    count_params,
    encode_sentence,
    encode_tags,
    itemize_params,
    leaf_lstm_step,
    param_shapes,
    spinn_encode,
    spinn_encode_batch,
)
from satatree.numeric import Tensor, take_rows
from satatree.treebank import BinaryTree, to_transitions
from satatree.treebank.clusters import N_WORD_GROUPS
from satatree.verify import random_model, random_tree, tiny_config

ABLATIONS = [(leaf, tag) for leaf in ("lstm", "bilstm", "fc") for tag in ("structure_aware", "naive", "none")]


def _model(seed: int = 0, **encoder):
    rng = np.random.default_rng(seed)
    return random_model(tiny_config(encoder=encoder), rng), rng


def _view(model) -> EncoderView:
    return EncoderView.bind(model.params, model.config.encoder)


def test_snli_parameter_count():
    assert count_params(load_config("snli")) == 3_293_967


def test_itemized_count_sums_to_total():
    config = load_config("snli")
    items = itemize_params(config)
    assert sum(items.values()) == count_params(config)
    assert "embed.words" not in items
    assert items["tag.W_T"] == 5 * 128 * 3 * 128


def test_frozen_word_vectors_are_not_counted():
    config = load_config("snli")
    assert "embed.words" in param_shapes(config, vocab_size=10)
    assert count_params(config, vocab_size=10) == count_params(config)
    tuned = load_config("snli", ["encoder.fine_tune_words=true"])
    assert count_params(tuned, vocab_size=10) == count_params(tuned) + 10 * 300


def test_tag_free_model_is_smaller_by_exactly_the_tag_tensors():
    full = load_config("default")
    bare = load_config("default", ["encoder.tag_mode=none"])
    d_h, d_T = full.encoder.d_h, full.encoder.d_T
    tag_tree = 23 * d_T + 2 * d_T * d_T + 2 * d_T + 5 * d_T * 3 * d_T + 5 * d_T
    gate_columns = 4 * d_h * d_T
    assert count_params(full) - count_params(bare) == tag_tree + gate_columns


def test_initialization():
    config = tiny_config(encoder={"forget_bias": 1.0})
    params = SataParams.initialize(config, 10, np.random.default_rng(0))
    b_w = params["word.b_w"].value
    assert b_w[:3].tolist() == [0.0] * 3
    assert b_w[3:9].tolist() == [1.0] * 6
    assert b_w[9:].tolist() == [0.0] * 3
    assert params["leaf.b_L"].value[3:6].tolist() == [1.0] * 3
    assert not params["embed.words"].value[0].any()
    assert params["embed.words"].decay is False
    assert params["word.W_w"].decay is True
    assert params["word.a_w"].decay is False


def test_node_annotations_cover_every_node():
    model, rng = _model()
    tree = random_tree(5, rng)
    encoding = model.encode(tree)
    assert len(encoding.nodes) == 9
    assert [n.span for n in encoding.nodes] == tree.spans()
    assert encoding.nodes[-1].span == (0, 5)
    assert encoding.root is encoding.nodes[-1].word
    assert sum(n.is_leaf for n in encoding.nodes) == 5


def test_single_leaf_sentence():
    model, _ = _model()
    tree = BinaryTree("NOUN", 0, token="w3")
    encoding = model.encode(tree)
    assert len(encoding.nodes) == 1
    assert encoding.root.dim == 3


def test_word_id_count_must_match_leaves():
    model, rng = _model()
    with pytest.raises(DimensionError, match="2 word ids for a tree with 3 leaves"):
        encode_sentence(random_tree(3, rng), [2, 3], _view(model))


@pytest.mark.parametrize("leaf_mode, tag_mode", ABLATIONS)
def test_spinn_matches_recursive_exactly(leaf_mode, tag_mode):
    model, rng = _model(leaf_mode=leaf_mode, tag_mode=tag_mode)
    view = _view(model)
    for _ in range(10):
        tree = random_tree(int(rng.integers(1, 9)), rng)
        ids = model.vocab.encode(tree.tokens())
        recursive = encode_sentence(tree, ids, view)
        stacked = spinn_encode(to_transitions(tree), ids, view)
        for a, b in zip(recursive.nodes, stacked.nodes, strict=True):
            assert a.span == b.span
            np.testing.assert_array_equal(a.word.h.data, b.word.h.data)
            np.testing.assert_array_equal(a.word.c.data, b.word.c.data)


def test_batched_spinn_matches_single():
    model, rng = _model()
    view = _view(model)
    trees = [random_tree(n, rng) for n in (1, 4, 7)]
    items = [(to_transitions(t), model.vocab.encode(t.tokens())) for t in trees]
    for (program, ids), batched in zip(items, spinn_encode_batch(items, view), strict=True):
        single = spinn_encode(program, ids, view)
        np.testing.assert_array_equal(single.root.h.data, batched.root.h.data)


def test_spinn_rejects_token_mismatch():
    model, rng = _model()
    tree = random_tree(3, rng)
    with pytest.raises(TransitionError, match="3 SHIFTs for 2 tokens"):
        spinn_encode(to_transitions(tree), [2, 3], _view(model))


def test_tag_states_ignore_words():
    model, rng = _model()
    view = _view(model)
    for _ in range(20):
        tree = random_tree(int(rng.integers(2, 9)), rng)
        shuffled = _relabel(tree, list(rng.permutation(tree.tokens())))
        for a, b in zip(encode_tags(tree, view), encode_tags(shuffled, view), strict=True):
            np.testing.assert_array_equal(a.h.data, b.h.data)


def test_tag_states_need_structure_aware_mode():
    model, rng = _model(tag_mode="naive")
    with pytest.raises(ValueError, match="structure-aware"):
        encode_tags(random_tree(2, rng), _view(model))


def test_embedding_dropout_only_in_train_mode():
    model, rng = _model(embedding_dropout=0.5)
    tree = random_tree(4, rng)
    first = model.encode(tree)
    second = model.encode(tree)
    np.testing.assert_array_equal(first.root.h.data, second.root.h.data)
    dropped = model.encode(tree, train=True, rng=np.random.default_rng(1))
    assert not np.array_equal(first.root.h.data, dropped.root.h.data)
    with pytest.raises(ValueError, match="random generator"):
        model.encode(tree, train=True)


def _relabel(tree: BinaryTree, tokens: list[str]) -> BinaryTree:
    position = 0

    def copy(node: BinaryTree) -> BinaryTree:
        nonlocal position
        if node.is_leaf:
            position += 1
            return BinaryTree(node.tag, node.cluster_id, token=tokens[position - 1])
        assert node.left is not None and node.right is not None
        left = copy(node.left)
        return BinaryTree(node.tag, node.cluster_id, left, copy(node.right))

    return copy(tree)


def _unroll(xs, cell, d_h):
    state = CellState(Tensor(np.zeros(d_h)), Tensor(np.zeros(d_h)))
    out = []
    for x in xs:
        state = leaf_lstm_step(state, x, cell)
        out.append(state)
    return out


def test_bilstm_leaves_project_h_and_c_with_one_map():
    model, rng = _model(leaf_mode="bilstm")
    assert [n for n in param_shapes(model.config) if n.startswith("leaf.proj")] == ["leaf.proj.W_p", "leaf.proj.b_p"]
    view = _view(model)
    tree = random_tree(4, rng)
    encoding = encode_sentence(tree, model.vocab.encode(tree.tokens()), view)
    xs = [take_rows(view.words, i) for i in model.vocab.encode(tree.tokens())]
    d_h = model.config.encoder.d_h
    forward = _unroll(xs, view.leaf_lstm, d_h)
    backward = _unroll(xs[::-1], view.leaf_bwd, d_h)[::-1]
    W_p, b_p = (t.data for t in view.leaf_proj)
    leaves = [n for n in encoding.nodes if n.span[1] - n.span[0] == 1]
    for leaf, f, b in zip(leaves, forward, backward, strict=True):
        np.testing.assert_allclose(leaf.word.h.data, W_p @ np.concatenate([f.h.data, b.h.data]) + b_p)
        np.testing.assert_allclose(leaf.word.c.data, W_p @ np.concatenate([f.c.data, b.c.data]) + b_p)


def test_deep_tree_encodes_without_recursion_limit():
    model, _ = _model()
    view = _view(model)
    tree = BinaryTree("NN", 0, token="w0")
    for i in range(1, 1500):
        tree = BinaryTree("NP", N_WORD_GROUPS + 1, tree, BinaryTree("NN", 0, token=f"w{i % 16}"))
    ids = model.vocab.encode(tree.tokens())
    recursive = encode_sentence(tree, ids, view)
    stacked = spinn_encode(to_transitions(tree), ids, view)
    assert len(recursive.nodes) == 2 * 1500 - 1
    assert recursive.nodes[-1].span == (0, 1500)
    np.testing.assert_array_equal(recursive.root.h.data, stacked.root.h.data)
    assert len(encode_tags(tree, view)) == len(recursive.nodes)
