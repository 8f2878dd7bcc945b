"""
Verification suites behind the ``gradcheck`` and ``equiv`` commands: random tagged binary trees,
finite-difference checks for every differentiable piece of the model, the recursive-versus-SPINN
comparison, and the check that tag inputs never reach the composed candidate.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from satatree.config import RunConfig
from satatree.embeddings import WordVocab
from satatree.model import (
    CellState,
    EncoderView,
    Encoding,
    LeafLstmParams,
    PlainTreeCellParams,
    SataModel,
    TagTreeCellParams,
    WordTreeCellParams,
    classifier_logits,
    cross_entropy,
    encode_sentence,
    encode_tags,
    leaf_lstm_step,
    sata_candidate,
    sata_compose,
    snli_features,
    spinn_encode,
    spinn_encode_batch,
    tag_internal_step,
    tag_leaf_step,
    tree_lstm_step,
)
from satatree.model.heads import ClassifierParams
from satatree.numeric import (
    GradCheckResult,
    Parameter,
    Tensor,
    add,
    check_gradients,
    hadamard,
    stack,
    sum_,
)
from satatree.treebank.clusters import N_WORD_GROUPS, PHRASE_GROUPS, WORD_GROUPS, load_cluster_map
from satatree.treebank.dataset import Example
from satatree.treebank.transitions import to_transitions
from satatree.treebank.trees import BinaryTree

logger = logging.getLogger(__name__)

GRAD_TOLERANCE = 1e-4
EQUIV_TOLERANCE = 1e-12


def random_tree(n_leaves: int, rng: np.random.Generator, first_token: int = 0) -> BinaryTree:
    """A uniformly split binary tree with random word tags on leaves and phrase tags above."""

    if n_leaves < 1:
        raise ValueError("a tree needs at least one leaf")
    done: list[BinaryTree] = []
    # (n_leaves, first_token) builds a subtree; None joins the top two built subtrees.
    stack: list[tuple[int, int] | None] = [(n_leaves, first_token)]
    while stack:
        item = stack.pop()
        if item is None:
            group = int(rng.integers(len(PHRASE_GROUPS)))
            right = done.pop()
            left = done.pop()
            done.append(BinaryTree(PHRASE_GROUPS[group], N_WORD_GROUPS + group, left, right))
            continue
        n, first = item
        if n == 1:
            group = int(rng.integers(len(WORD_GROUPS)))
            done.append(BinaryTree(WORD_GROUPS[group], group, token=f"w{first}"))
            continue
        split = int(rng.integers(1, n))
        stack.extend([None, (n - split, first + split), (split, first)])
    return done[0]


def tiny_config(**sections: dict) -> RunConfig:
    """A float64 model small enough for coordinate-wise finite differences."""

    base: dict = {
        "encoder": {"d_w": 3, "d_h": 3, "d_T": 2, "dtype": "float64"},
        "head": {"n_classes": 3, "d_s": 4, "batch_norm": False},
    }
    for name, values in sections.items():
        base.setdefault(name, {}).update(values)
    return RunConfig.model_validate(base)


def random_model(config: RunConfig, rng: np.random.Generator, n_words: int = 16, scale: float = 0.5) -> SataModel:
    """A model whose every parameter (biases included) is drawn from N(0, scale^2)."""

    vocab = WordVocab.build([[f"w{i}" for i in range(n_words)]])
    model = SataModel.create(config, vocab, load_cluster_map(), rng)
    for p in model.parameters():
        p.value[...] = rng.normal(0.0, scale, size=p.shape)
    return model


def _param(name: str, shape: tuple[int, ...], rng: np.random.Generator) -> Parameter:
    return Parameter(name, rng.normal(0.0, 0.5, size=shape))


def _readout(state: CellState, weights: tuple[np.ndarray, np.ndarray]) -> Tensor:
    """A generic scalar of a cell state, so no coordinate of h or c has a zero upstream gradient."""

    return add(sum_(hadamard(state.h, Tensor(weights[0]))), sum_(hadamard(state.c, Tensor(weights[1]))))


def _readout_weights(d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(size=d), rng.normal(size=d)


def _state(prefix: str, d: int, rng: np.random.Generator) -> tuple[Parameter, Parameter]:
    return _param(f"{prefix}.h", (d,), rng), _param(f"{prefix}.c", (d,), rng)


def _cell_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[[], Tensor], list[Parameter]]]:
    cases: dict[str, tuple[Callable[[], Tensor], list[Parameter]]] = {}

    d = 3
    W, b = _param("W", (5 * d, 2 * d), rng), _param("b", (5 * d,), rng)
    (lh, lc), (rh, rc) = _state("left", d, rng), _state("right", d, rng)
    w = _readout_weights(d, rng)

    def plain() -> Tensor:
        p = PlainTreeCellParams(W.tensor(), b.tensor())
        out = tree_lstm_step(CellState(lh.tensor(), lc.tensor()), CellState(rh.tensor(), rc.tensor()), p)
        return _readout(out, w)

    cases["tree_lstm_step"] = (plain, [W, b, lh, lc, rh, rc])

    d_T = 3
    tag_params = [
        _param("U_T", (2 * d_T, d_T), rng),
        _param("a_T", (2 * d_T,), rng),
        _param("W_T", (5 * d_T, 3 * d_T), rng),
        _param("b_T", (5 * d_T,), rng),
    ]
    e = _param("e", (d_T,), rng)
    (tlh, tlc), (trh, trc) = _state("tag_left", d_T, rng), _state("tag_right", d_T, rng)
    wt = _readout_weights(d_T, rng)

    def tag_cell() -> TagTreeCellParams:
        return TagTreeCellParams(*(p.tensor() for p in tag_params))

    def tag_leaf() -> Tensor:
        return _readout(tag_leaf_step(e.tensor(), tag_cell()), wt)

    def tag_internal() -> Tensor:
        left = CellState(tlh.tensor(), tlc.tensor())
        right = CellState(trh.tensor(), trc.tensor())
        return _readout(tag_internal_step(left, right, e.tensor(), tag_cell()), wt)

    cases["tag_leaf_step"] = (tag_leaf, [tag_params[0], tag_params[1], e])
    cases["tag_internal_step"] = (tag_internal, [tag_params[2], tag_params[3], e, tlh, tlc, trh, trc])

    d_h, d_w, steps = 3, 2, 4
    W_L, b_L = _param("W_L", (4 * d_h, d_h + d_w), rng), _param("b_L", (4 * d_h,), rng)
    xs = [_param(f"x{t}", (d_w,), rng) for t in range(steps)]
    wl = _readout_weights(d_h, rng)

    def leaf_sequence() -> Tensor:
        p = LeafLstmParams(W_L.tensor(), b_L.tensor())
        zeros = Tensor(np.zeros(d_h))
        state = CellState(zeros, zeros)
        total: Tensor | None = None
        for x in xs:
            state = leaf_lstm_step(state, x.tensor(), p)
            term = _readout(state, wl)
            total = term if total is None else add(total, term)
        assert total is not None
        return total

    cases["leaf_lstm_step"] = (leaf_sequence, [W_L, b_L, *xs])

    d_h, d_T = 3, 2
    word_params = [
        _param("U_w", (d_h, 2 * d_h), rng),
        _param("a_w", (d_h,), rng),
        _param("W_w", (4 * d_h, 2 * d_h + d_T), rng),
        _param("b_w", (4 * d_h,), rng),
    ]
    tag_h = _param("tag_h", (d_T,), rng)
    (wlh, wlc), (wrh, wrc) = _state("word_left", d_h, rng), _state("word_right", d_h, rng)
    ww = _readout_weights(d_h, rng)

    def compose() -> Tensor:
        p = WordTreeCellParams(*(q.tensor() for q in word_params))
        left = CellState(wlh.tensor(), wlc.tensor())
        right = CellState(wrh.tensor(), wrc.tensor())
        return _readout(sata_compose(left, right, tag_h.tensor(), p), ww)

    cases["sata_compose"] = (compose, [*word_params, tag_h, wlh, wlc, wrh, wrc])
    return cases


def _model_cases(rng: np.random.Generator) -> dict[str, tuple[Callable[[], Tensor], list[Parameter]]]:
    cases: dict[str, tuple[Callable[[], Tensor], list[Parameter]]] = {}

    classify_model = random_model(tiny_config(), rng)
    tree = BinaryTree(
        "S",
        N_WORD_GROUPS,
        BinaryTree("NP", N_WORD_GROUPS + 1, BinaryTree("DET", 5, token="w0"), BinaryTree("NOUN", 0, token="w1")),
        BinaryTree("VERB", 1, token="w2"),
    )
    example = Example(label=2, tokens=tree.tokens(), tree=tree)
    cases["encoder+classify"] = (
        lambda: classify_model.forward([example], train=False).loss,
        classify_model.parameters(),
    )

    nli_model = random_model(tiny_config(head={"task": "nli"}), rng)
    hypothesis = random_tree(2, rng, first_token=3)
    pair = Example(
        label=1,
        tokens=tree.tokens(),
        tree=tree,
        hypothesis_tokens=hypothesis.tokens(),
        hypothesis=hypothesis,
    )
    cases["snli_features+cross_entropy"] = (
        lambda: nli_model.forward([pair], train=False).loss,
        nli_model.parameters(),
    )

    p_vec, h_vec = _param("premise", (3,), rng), _param("hypothesis", (3,), rng)
    h_vec.value += 2.0  # keep |p - h| away from its kink
    head = {name: _param(name, shape, rng) for name, shape in (("W_s", (4, 12)), ("b_s", (4,)), ("W_c", (3, 4)), ("b_c", (3,)))}
    head_config = tiny_config().head

    def features() -> Tensor:
        p = ClassifierParams(*(head[k].tensor() for k in ("W_s", "b_s", "W_c", "b_c")))
        z = snli_features(p_vec.tensor(), h_vec.tensor())
        logits, _ = classifier_logits(stack([z]), p, head_config)
        return cross_entropy(logits, [0])

    cases["snli_features"] = (features, [p_vec, h_vec, *head.values()])

    inputs = _param("inputs", (3, 4), rng)
    bn_head = {
        name: _param(name, shape, rng)
        for name, shape in (("bn_W_s", (5, 4)), ("bn_b_s", (5,)), ("bn_W_c", (2, 5)), ("bn_b_c", (2,)), ("gamma", (4,)), ("beta", (4,)))
    }
    bn_config = tiny_config(head={"batch_norm": True}).head

    def batch_norm_train() -> Tensor:
        t = {k: v.tensor() for k, v in bn_head.items()}
        p = ClassifierParams(
            t["bn_W_s"], t["bn_b_s"], t["bn_W_c"], t["bn_b_c"], t["gamma"], t["beta"], np.zeros(4), np.ones(4)
        )
        logits, _ = classifier_logits(inputs.tensor(), p, bn_config, train=True)
        return cross_entropy(logits, [0, 1, 1])

    cases["batch_norm(train)"] = (batch_norm_train, [inputs, *bn_head.values()])
    return cases


def gradient_suite(seed: int = 0, eps: float = 1e-5) -> dict[str, GradCheckResult]:
    """Central-difference check of every cell, the full encoder and both heads."""

    rng = np.random.default_rng(seed)
    results: dict[str, GradCheckResult] = {}
    for name, (objective, params) in {**_cell_cases(rng), **_model_cases(rng)}.items():
        results[name] = check_gradients(objective, params, eps)
        logger.info("%s: max rel err %.3e over %d coordinates", name, results[name].max_rel_err, results[name].coordinates)
    return results


def _state_deviation(a: Encoding, b: Encoding) -> float:
    if len(a.nodes) != len(b.nodes):
        return float("inf")
    dev = 0.0
    for x, y in zip(a.nodes, b.nodes):
        if x.span != y.span:
            return float("inf")
        pairs = [(x.word.h, y.word.h), (x.word.c, y.word.c)]
        if x.tag_state is not None and y.tag_state is not None:
            pairs += [(x.tag_state.h, y.tag_state.h), (x.tag_state.c, y.tag_state.c)]
        for u, v in pairs:
            dev = max(dev, float(np.max(np.abs(u.data - v.data))))
    return dev


@dataclass(frozen=True)
class EquivalenceReport:
    trees: int
    max_dev: float
    batched_max_dev: float


def spinn_equivalence(
    n_trees: int = 100,
    max_leaves: int = 12,
    seed: int = 0,
    config: RunConfig | None = None,
    batch_size: int = 4,
) -> EquivalenceReport:
    """Largest node-state difference between the recursive and shift-reduce encoders."""

    rng = np.random.default_rng(seed)
    model = random_model(config or tiny_config(), rng)
    view = EncoderView.bind(model.params, model.config.encoder)
    max_dev = 0.0
    batched_dev = 0.0
    pending: list[tuple[BinaryTree, list[int], Encoding]] = []

    for _ in range(n_trees):
        tree = random_tree(int(rng.integers(1, max_leaves + 1)), rng)
        ids = model.vocab.encode(tree.tokens())
        recursive = encode_sentence(tree, ids, view)
        stacked = spinn_encode(to_transitions(tree), ids, view)
        max_dev = max(max_dev, _state_deviation(recursive, stacked))
        pending.append((tree, ids, recursive))

    for start in range(0, len(pending), batch_size):
        chunk = pending[start : start + batch_size]
        batched = spinn_encode_batch([(to_transitions(t), ids) for t, ids, _ in chunk], view)
        for (_, _, recursive), encoding in zip(chunk, batched):
            batched_dev = max(batched_dev, _state_deviation(recursive, encoding))

    return EquivalenceReport(n_trees, max_dev, batched_dev)


@dataclass(frozen=True)
class TagInvarianceReport:
    perturbations: int
    max_candidate_change: float
    min_state_change: float


def _children(nodes: list, index: int) -> tuple[int, int]:
    """Post-order indices of the left and right child of internal node ``index``."""

    right = index - 1
    width = nodes[right].span[1] - nodes[right].span[0]
    return index - 2 * width, right


def tag_invariance(n_perturbations: int = 50, n_leaves: int = 6, seed: int = 0) -> TagInvarianceReport:
    """Perturb every tag parameter and recompose each internal node from its unperturbed children.

    The composed candidate must not move at all, while the node's hidden state does.
    """

    rng = np.random.default_rng(seed)
    model = random_model(tiny_config(), rng)
    tree = random_tree(n_leaves, rng)
    tag_params = [p for name, p in model.named_parameters().items() if name.startswith(("tag.", "embed.tags"))]
    base = model.encode(tree)
    originals = [p.value.copy() for p in tag_params]

    def frozen(state: CellState) -> CellState:
        return CellState(Tensor(state.h.data.copy()), Tensor(state.c.data.copy()))

    max_candidate = 0.0
    min_state = float("inf")
    try:
        for _ in range(n_perturbations):
            for p, original in zip(tag_params, originals):
                p.value[...] = original + rng.normal(0.0, 0.5, size=p.shape)
            view = EncoderView.bind(model.params, model.config.encoder)
            tag_states = encode_tags(tree, view)
            state_change = 0.0
            for node in base.nodes:
                if node.candidate is None:
                    continue
                left_index, right_index = _children(base.nodes, node.index)
                left, right = frozen(base.nodes[left_index].word), frozen(base.nodes[right_index].word)
                candidate = sata_candidate(left, right, view.word_cell)
                state = sata_compose(left, right, tag_states[node.index].h, view.word_cell)
                max_candidate = max(max_candidate, float(np.max(np.abs(candidate.data - node.candidate.data))))
                state_change = max(state_change, float(np.max(np.abs(state.h.data - node.word.h.data))))
            min_state = min(min_state, state_change)
    finally:
        for p, original in zip(tag_params, originals):
            p.value[...] = original
    return TagInvarianceReport(n_perturbations, max_candidate, min_state)


__all__ = [
    "EQUIV_TOLERANCE",
    "EquivalenceReport",
    "GRAD_TOLERANCE",
    "TagInvarianceReport",
    "gradient_suite",
    "random_model",
    "random_tree",
    "spinn_equivalence",
    "tag_invariance",
    "tiny_config",
]
