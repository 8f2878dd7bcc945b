from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from satatree.config import RunConfig
from satatree.embeddings import TagEmbedding, WordEmbedding, WordVocab
from satatree.model.encoder import EncoderView, Encoding, encode_sentence
from satatree.model.heads import (
    BatchStats,
    ClassifierParams,
    classifier_logits,
    cross_entropy,
    snli_features,
)
from satatree.model.params import SataParams
from satatree.numeric import Parameter, Tensor, add, scale, stack
from satatree.treebank.clusters import ClusterMap
from satatree.treebank.dataset import IGNORE_LABEL, Example
from satatree.treebank.trees import BinaryTree


@dataclass(frozen=True)
class ForwardResult:
    loss: Tensor
    logits: Tensor
    labels: list[int]
    stats: BatchStats | None
    n_node_terms: int = 0


class SataModel:
    """Encoder, head and vocabulary of one run, behind a batch-level interface."""

    def __init__(self, config: RunConfig, vocab: WordVocab, clusters: ClusterMap, params: SataParams) -> None:
        self.config = config
        self.vocab = vocab
        self.clusters = clusters
        self.params = params

    @classmethod
    def create(
        cls,
        config: RunConfig,
        vocab: WordVocab,
        clusters: ClusterMap,
        rng: np.random.Generator,
        word_vectors: np.ndarray | None = None,
    ) -> SataModel:
        return cls(config, vocab, clusters, SataParams.initialize(config, len(vocab), rng, word_vectors))

    @property
    def digest(self) -> str:
        return self.config.digest()

    def named_parameters(self) -> dict[str, Parameter]:
        return dict(self.params.params)

    def parameters(self) -> list[Parameter]:
        return list(self.params)

    def buffers(self) -> dict[str, np.ndarray]:
        return self.params.buffers

    @property
    def word_embedding(self) -> WordEmbedding:
        return WordEmbedding(self.params["embed.words"])

    @property
    def tag_embedding(self) -> TagEmbedding | None:
        return TagEmbedding(self.params["embed.tags"]) if "embed.tags" in self.params else None

    def bind(self) -> tuple[EncoderView, ClassifierParams]:
        return EncoderView.bind(self.params, self.config.encoder), ClassifierParams.bind(self.params)

    def encode(
        self,
        tree: BinaryTree,
        view: EncoderView | None = None,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Encoding:
        view = view or EncoderView.bind(self.params, self.config.encoder)
        return encode_sentence(tree, self.vocab.encode(tree.tokens()), view, train, rng)

    def _inputs(
        self,
        batch: Sequence[Example],
        view: EncoderView,
        train: bool,
        rng: np.random.Generator | None,
    ) -> tuple[Tensor, list[Encoding]]:
        rows: list[Tensor] = []
        encodings: list[Encoding] = []
        nli = self.config.head.task == "nli"
        for example in batch:
            premise = self.encode(example.tree, view, train, rng)
            encodings.append(premise)
            if nli:
                if example.hypothesis is None:
                    raise ValueError("the NLI head needs sentence pairs")
                hypothesis = self.encode(example.hypothesis, view, train, rng)
                rows.append(snli_features(premise.root.h, hypothesis.root.h))
            else:
                rows.append(premise.root.h)
        return stack(rows), encodings

    def logits(
        self,
        batch: Sequence[Example],
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        view, head = self.bind()
        inputs, _ = self._inputs(batch, view, train, rng)
        out, _ = classifier_logits(inputs, head, self.config.head, train, rng)
        return out

    def forward(
        self,
        batch: Sequence[Example],
        train: bool = True,
        rng: np.random.Generator | None = None,
        phrase_supervision: bool = False,
    ) -> ForwardResult:
        """Mean cross-entropy over the batch.

        With phrase supervision, every labeled non-root node contributes one more term through the
        same classifier and the loss is the mean over all terms.
        """

        if not batch:
            raise ValueError("empty batch")
        view, head = self.bind()
        inputs, encodings = self._inputs(batch, view, train, rng)
        logits, stats = classifier_logits(inputs, head, self.config.head, train, rng)
        labels = [e.label for e in batch]
        loss = cross_entropy(logits, labels)

        node_rows: list[Tensor] = []
        node_labels: list[int] = []
        if phrase_supervision and self.config.head.task == "classify":
            for example, encoding in zip(batch, encodings):
                if example.node_labels is None:
                    continue
                for node, label in zip(encoding.nodes[:-1], example.node_labels[:-1]):
                    if label != IGNORE_LABEL:
                        node_rows.append(node.word.h)
                        node_labels.append(label)
        if node_rows:
            node_logits, _ = classifier_logits(stack(node_rows), head, self.config.head, train, rng)
            node_loss = cross_entropy(node_logits, node_labels)
            total = len(labels) + len(node_labels)
            loss = add(scale(loss, len(labels) / total), scale(node_loss, len(node_labels) / total))

        return ForwardResult(loss, logits, labels, stats, len(node_labels))

    def predict(self, batch: Sequence[Example], chunk_size: int = 64) -> np.ndarray:
        """Eval-mode argmax class for every example."""

        out: list[np.ndarray] = []
        for start in range(0, len(batch), chunk_size):
            logits = self.logits(batch[start : start + chunk_size])
            out.append(np.argmax(logits.data, axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


__all__ = ["ForwardResult", "SataModel"]
