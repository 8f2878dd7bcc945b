"""
The SATA encoder: a tag tree-LSTM over the tags and shape of a binary parse, a leaf module over the
word sequence, and a word tree-LSTM whose gates read the tag states.

Two execution paths produce the same node states: ``encode_sentence`` walks the tree in post-order and
``spinn_encode`` runs its shift-reduce program on a stack. Both call the cells in post-order, so
their outputs agree bit for bit.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from satatree.config import EncoderConfig
from satatree.errors import DimensionError, TransitionError
from satatree.model.cells import (
    CellState,
    FcLeafParams,
    LeafLstmParams,
    TagTreeCellParams,
    WordTreeCellParams,
    fc_leaf_step,
    leaf_lstm_step,
    sata_candidate,
    sata_compose,
    tag_internal_step,
    tag_leaf_step,
)
from satatree.model.params import SataParams
from satatree.numeric import Tensor, add, concat, dropout, matmul, take_rows
from satatree.treebank.trees import BinaryTree
from satatree.treebank.transitions import Op, Transition, TransitionSequence


@dataclass(frozen=True)
class NodeAnnotation:
    """Everything the encoder computed at one node. ``candidate`` is set on internal nodes only."""

    index: int
    span: tuple[int, int]
    tag: str
    cluster_id: int
    word: CellState
    tag_state: CellState | None
    candidate: Tensor | None = None

    @property
    def is_leaf(self) -> bool:
        return self.candidate is None


@dataclass(frozen=True)
class Encoding:
    root: CellState
    nodes: list[NodeAnnotation]
    """Post-order; the root is last."""


@dataclass(frozen=True)
class EncoderView:
    """Tensor views of the encoder parameters for one forward pass.

    Every node of every sentence in the pass reads the same leaf tensors, so their gradients meet
    in one place.
    """

    config: EncoderConfig
    words: Tensor
    word_cell: WordTreeCellParams
    tags: Tensor | None = None
    tag_cell: TagTreeCellParams | None = None
    leaf_lstm: LeafLstmParams | None = None
    leaf_bwd: LeafLstmParams | None = None
    leaf_proj: tuple[Tensor, Tensor] | None = None
    leaf_fc: FcLeafParams | None = None

    @classmethod
    def bind(cls, params: SataParams, config: EncoderConfig) -> EncoderView:
        t = {name: p.tensor() for name, p in params.params.items()}
        kwargs: dict = {}
        if config.tag_mode != "none":
            kwargs["tags"] = t["embed.tags"]
        if config.tag_mode == "structure_aware":
            kwargs["tag_cell"] = TagTreeCellParams(t["tag.U_T"], t["tag.a_T"], t["tag.W_T"], t["tag.b_T"])
        match config.leaf_mode:
            case "lstm":
                kwargs["leaf_lstm"] = LeafLstmParams(t["leaf.W_L"], t["leaf.b_L"])
            case "bilstm":
                kwargs["leaf_lstm"] = LeafLstmParams(t["leaf.fwd.W_L"], t["leaf.fwd.b_L"])
                kwargs["leaf_bwd"] = LeafLstmParams(t["leaf.bwd.W_L"], t["leaf.bwd.b_L"])
                kwargs["leaf_proj"] = (t["leaf.proj.W_p"], t["leaf.proj.b_p"])
            case "fc":
                kwargs["leaf_fc"] = FcLeafParams(t["leaf.W_fc"], t["leaf.b_fc"])
        return cls(
            config=config,
            words=t["embed.words"],
            word_cell=WordTreeCellParams(t["word.U_w"], t["word.a_w"], t["word.W_w"], t["word.b_w"]),
            **kwargs,
        )

    @property
    def dtype(self) -> np.dtype:
        return self.words.data.dtype


def embed_words(
    view: EncoderView,
    word_ids: Sequence[int],
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> list[Tensor]:
    if not word_ids:
        raise DimensionError("cannot encode an empty sentence")
    rate = view.config.embedding_dropout if train else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("embedding dropout needs a random generator")
    xs = [take_rows(view.words, i) for i in word_ids]
    if rate > 0.0:
        assert rng is not None
        xs = [dropout(x, rate, rng) for x in xs]
    return xs


def _zero_state(d: int, dtype: np.dtype) -> CellState:
    zeros = Tensor(np.zeros(d, dtype=dtype))
    return CellState(zeros, zeros)


def _run_lstm(xs: Sequence[Tensor], p: LeafLstmParams, dtype: np.dtype) -> list[CellState]:
    state = _zero_state(p.d_h, dtype)
    out = []
    for x in xs:
        state = leaf_lstm_step(state, x, p)
        out.append(state)
    return out


def leaf_states(view: EncoderView, xs: Sequence[Tensor]) -> list[CellState]:
    """The (h, c) each leaf of the word tree starts from, one per token."""

    match view.config.leaf_mode:
        case "lstm":
            assert view.leaf_lstm is not None
            return _run_lstm(xs, view.leaf_lstm, view.dtype)
        case "bilstm":
            assert view.leaf_lstm is not None and view.leaf_bwd is not None and view.leaf_proj is not None
            forward = _run_lstm(xs, view.leaf_lstm, view.dtype)
            backward = _run_lstm(xs[::-1], view.leaf_bwd, view.dtype)[::-1]
            # One projection of [fwd; bwd] to d_h, applied to h and c alike.
            W_p, b_p = view.leaf_proj
            return [
                CellState(
                    h=add(matmul(W_p, concat([f.h, b.h])), b_p),
                    c=add(matmul(W_p, concat([f.c, b.c])), b_p),
                )
                for f, b in zip(forward, backward)
            ]
        case "fc":
            assert view.leaf_fc is not None
            return [fc_leaf_step(x, view.leaf_fc) for x in xs]
    raise ValueError(f"unknown leaf mode {view.config.leaf_mode!r}")


def lookup_tag(view: EncoderView, cluster_id: int) -> Tensor:
    if view.tags is None:
        raise ValueError("this encoder has no tag embeddings")
    return take_rows(view.tags, cluster_id)


def encode_tags(tree: BinaryTree, view: EncoderView) -> list[CellState]:
    """Tag tree-LSTM states in post-order. Only tags and tree shape are read, never words."""

    if view.tag_cell is None:
        raise ValueError("tag states need the structure-aware tag mode")
    cell = view.tag_cell
    states: list[CellState] = []
    pending: list[CellState] = []
    for node in tree.postorder():
        e = lookup_tag(view, node.cluster_id)
        if node.is_leaf:
            state = tag_leaf_step(e, cell)
        else:
            right = pending.pop()
            left = pending.pop()
            state = tag_internal_step(left, right, e, cell)
        pending.append(state)
        states.append(state)
    return states


def _gate_tag_input(view: EncoderView, tag_state: CellState | None, cluster_id: int) -> Tensor | None:
    match view.config.tag_mode:
        case "structure_aware":
            assert tag_state is not None
            return tag_state.h
        case "naive":
            return lookup_tag(view, cluster_id)
    return None


def encode_sentence(
    tree: BinaryTree,
    word_ids: Sequence[int],
    view: EncoderView,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Encoding:
    """Tree-walking encoder. Returns the root state and an annotation for each of the 2n - 1 nodes."""

    if len(word_ids) != tree.n_leaves:
        raise DimensionError(f"{len(word_ids)} word ids for a tree with {tree.n_leaves} leaves")
    leaves = leaf_states(view, embed_words(view, word_ids, train, rng))
    tag_states = encode_tags(tree, view) if view.tag_cell is not None else None
    nodes: list[NodeAnnotation] = []
    pending: list[NodeAnnotation] = []
    position = 0
    for index, node in enumerate(tree.postorder()):
        tag_state = tag_states[index] if tag_states is not None else None
        candidate = None
        if node.is_leaf:
            word, span = leaves[position], (position, position + 1)
            position += 1
        else:
            right = pending.pop()
            left = pending.pop()
            candidate = sata_candidate(left.word, right.word, view.word_cell)
            word = sata_compose(
                left.word,
                right.word,
                _gate_tag_input(view, tag_state, node.cluster_id),
                view.word_cell,
                candidate,
            )
            span = (left.span[0], right.span[1])
        annotation = NodeAnnotation(index, span, node.tag, node.cluster_id, word, tag_state, candidate)
        pending.append(annotation)
        nodes.append(annotation)
    return Encoding(pending[0].word, nodes)


class SpinnMachine:
    """Shift-reduce executor for one sentence. SHIFT pushes the next leaf state; REDUCE pops two."""

    def __init__(
        self,
        word_ids: Sequence[int],
        view: EncoderView,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> None:
        self.view = view
        self.leaves = leaf_states(view, embed_words(view, word_ids, train, rng))
        self.stack: list[NodeAnnotation] = []
        self.nodes: list[NodeAnnotation] = []

    def step(self, t: Transition) -> None:
        view = self.view
        index = len(self.nodes)
        if t.op is Op.NOOP:
            return
        if t.op is Op.SHIFT:
            if t.index >= len(self.leaves):
                raise TransitionError(f"SHIFT of token {t.index} past the end of the sentence")
            tag_state = None
            if view.tag_cell is not None:
                tag_state = tag_leaf_step(lookup_tag(view, t.cluster_id), view.tag_cell)
            annotation = NodeAnnotation(
                index, (t.index, t.index + 1), t.tag, t.cluster_id, self.leaves[t.index], tag_state
            )
        else:
            if len(self.stack) < 2:
                raise TransitionError(f"REDUCE with stack depth {len(self.stack)}")
            right = self.stack.pop()
            left = self.stack.pop()
            tag_state = None
            if view.tag_cell is not None:
                assert left.tag_state is not None and right.tag_state is not None
                e = lookup_tag(view, t.cluster_id)
                tag_state = tag_internal_step(left.tag_state, right.tag_state, e, view.tag_cell)
            candidate = sata_candidate(left.word, right.word, view.word_cell)
            word = sata_compose(
                left.word,
                right.word,
                _gate_tag_input(view, tag_state, t.cluster_id),
                view.word_cell,
                candidate,
            )
            annotation = NodeAnnotation(
                index, (left.span[0], right.span[1]), t.tag, t.cluster_id, word, tag_state, candidate
            )
        self.stack.append(annotation)
        self.nodes.append(annotation)

    def result(self) -> Encoding:
        if len(self.stack) != 1:
            raise TransitionError(f"program left {len(self.stack)} items on the stack, expected 1")
        return Encoding(self.stack[0].word, list(self.nodes))


def spinn_encode(
    transitions: TransitionSequence,
    word_ids: Sequence[int],
    view: EncoderView,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Encoding:
    transitions.validate()
    if transitions.n_shifts != len(word_ids):
        raise TransitionError(f"{transitions.n_shifts} SHIFTs for {len(word_ids)} tokens")
    machine = SpinnMachine(word_ids, view, train, rng)
    for t in transitions:
        machine.step(t)
    return machine.result()


def spinn_encode_batch(
    items: Sequence[tuple[TransitionSequence, Sequence[int]]],
    view: EncoderView,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> list[Encoding]:
    """Run several programs in lockstep, padding the shorter ones with NOOPs."""

    if not items:
        return []
    length = max(len(seq) for seq, _ in items)
    programs = []
    for seq, word_ids in items:
        seq.validate()
        if seq.n_shifts != len(word_ids):
            raise TransitionError(f"{seq.n_shifts} SHIFTs for {len(word_ids)} tokens")
        programs.append(seq.padded(length))
    machines = [SpinnMachine(word_ids, view, train, rng) for _, word_ids in items]
    for step in range(length):
        for machine, program in zip(machines, programs):
            machine.step(program[step])
    return [m.result() for m in machines]


__all__ = [
    "EncoderView",
    "Encoding",
    "NodeAnnotation",
    "SpinnMachine",
    "embed_words",
    "encode_sentence",
    "encode_tags",
    "leaf_states",
    "lookup_tag",
    "spinn_encode",
    "spinn_encode_batch",
]
