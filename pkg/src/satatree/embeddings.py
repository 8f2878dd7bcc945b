"""
Word vocabulary, pretrained word vectors and the tag-embedding table.

The vocabulary is built from the training split only. Index 0 is padding and index 1 the
unknown-word entry; every other token is ordered by descending frequency, then alphabetically.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from satatree.errors import DatasetFormatError, DimensionError
from satatree.numeric import Parameter, Tensor, take_rows, uniform_init
from satatree.treebank.clusters import N_TAG_CATEGORIES

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"

OOV_INIT_RANGE = 0.05
TAG_INIT_RANGE = 0.005


def init_word_matrix(
    rows: int, d_w: int, rng: np.random.Generator, dtype: np.dtype | type = np.float64
) -> np.ndarray:
    """Uniform [-0.05, 0.05] rows; the padding row is zero."""

    matrix = uniform_init((rows, d_w), -OOV_INIT_RANGE, OOV_INIT_RANGE, rng, dtype)
    matrix[0] = 0.0
    return matrix


def init_tag_matrix(d_T: int, rng: np.random.Generator, dtype: np.dtype | type = np.float64) -> np.ndarray:
    return uniform_init((N_TAG_CATEGORIES, d_T), -TAG_INIT_RANGE, TAG_INIT_RANGE, rng, dtype)


class WordVocab:
    def __init__(self, tokens: Sequence[str]) -> None:
        if list(tokens[:2]) != [PAD, UNK]:
            raise ValueError(f"vocabulary must start with {PAD!r} and {UNK!r}")
        self.tokens: list[str] = list(tokens)
        self._index = {t: i for i, t in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]], min_count: int = 1) -> WordVocab:
        counts = Counter(token for sentence in sentences for token in sentence)
        counts.pop(PAD, None)
        counts.pop(UNK, None)
        kept = sorted((t for t, n in counts.items() if n >= min_count), key=lambda t: (-counts[t], t))
        return cls([PAD, UNK, *kept])

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def index(self, token: str) -> int:
        return self._index.get(token, self.unk_id)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.index(t) for t in tokens]


@dataclass(frozen=True)
class EmbeddingCoverage:
    found: int
    missing: int
    oov_tokens: tuple[str, ...] = field(repr=False)

    @property
    def ratio(self) -> float:
        total = self.found + self.missing
        return self.found / total if total else 0.0


class WordEmbedding:
    """A |V| x d_w matrix. Never weight-decayed; trained only when ``trainable`` is set."""

    def __init__(self, param: Parameter) -> None:
        if param.value.ndim != 2:
            raise DimensionError(f"word embedding must be a matrix, got {param.shape}")
        self.param = param

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, trainable: bool = True) -> WordEmbedding:
        return cls(Parameter("embed.words", matrix, trainable=trainable, decay=False))

    @classmethod
    def random(
        cls,
        vocab: WordVocab,
        d_w: int,
        rng: np.random.Generator,
        trainable: bool = True,
        dtype: np.dtype | type = np.float64,
    ) -> WordEmbedding:
        return cls.from_matrix(init_word_matrix(len(vocab), d_w, rng, dtype), trainable)

    @property
    def d_w(self) -> int:
        return self.param.shape[1]

    def __len__(self) -> int:
        return self.param.shape[0]

    def lookup_words(self, ids: Sequence[int]) -> Tensor:
        return take_rows(self.param.tensor(), list(ids))


class TagEmbedding:
    """One row per clustered tag category; always trainable."""

    def __init__(self, param: Parameter) -> None:
        if param.value.ndim != 2 or param.shape[0] != N_TAG_CATEGORIES:
            raise DimensionError(f"tag embedding needs {N_TAG_CATEGORIES} rows, got shape {param.shape}")
        self.param = param

    @classmethod
    def random(cls, d_T: int, rng: np.random.Generator, dtype: np.dtype | type = np.float64) -> TagEmbedding:
        return cls(Parameter("embed.tags", init_tag_matrix(d_T, rng, dtype), decay=False))

    def lookup_tag(self, cluster_id: int) -> Tensor:
        return take_rows(self.param.tensor(), cluster_id)


def _is_header(line: str) -> bool:
    parts = line.split()
    return len(parts) == 2 and all(p.isdigit() for p in parts)


def _parse_vector_line(line: str, d_w: int, number: int) -> tuple[str, np.ndarray]:
    parts = line.rstrip().split(" ")
    if len(parts) < d_w + 1:
        raise DatasetFormatError(f"expected {d_w} values, got {len(parts) - 1}", number)
    # A few released vector files contain tokens with spaces in them; the values are always last.
    token = " ".join(parts[:-d_w])
    try:
        values = np.asarray(parts[-d_w:], dtype=np.float64)
    except ValueError:
        raise DatasetFormatError("malformed vector value", number) from None
    try:
        float(parts[-d_w - 1])
    except ValueError:
        return token, values
    if len(parts) > d_w + 1:
        raise DatasetFormatError(f"expected {d_w} values, got {len(parts) - 1}", number)
    return token, values


def load_pretrained(
    path: Path | str,
    vocab: WordVocab,
    d_w: int,
    rng: np.random.Generator,
    trainable: bool = True,
    dtype: np.dtype | type = np.float64,
) -> tuple[WordEmbedding, EmbeddingCoverage]:
    """Copy vectors for in-vocabulary tokens out of a whitespace-separated text file.

    Rows the file does not cover (UNK included) start from uniform [-0.05, 0.05]. An optional
    ``<count> <dim>`` header line is detected and skipped.
    """

    embedding = WordEmbedding.random(vocab, d_w, rng, trainable, dtype)
    matrix = embedding.param.value
    seen: set[int] = set()
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip() or (number == 1 and _is_header(line)):
                continue
            token, values = _parse_vector_line(line, d_w, number)
            if token not in vocab:
                continue
            row = vocab.index(token)
            if row not in seen:
                matrix[row] = values
                seen.add(row)

    covered = {vocab.pad_id} | seen
    oov = tuple(t for i, t in enumerate(vocab.tokens) if i not in covered)
    coverage = EmbeddingCoverage(found=len(seen), missing=len(oov), oov_tokens=oov)
    logger.info(
        "pretrained vectors from %s cover %d of %d vocabulary entries (%.1f%%)",
        path,
        coverage.found,
        coverage.found + coverage.missing,
        100.0 * coverage.ratio,
    )
    return embedding, coverage


__all__ = [
    "EmbeddingCoverage",
    "PAD",
    "TagEmbedding",
    "UNK",
    "WordEmbedding",
    "WordVocab",
    "init_tag_matrix",
    "init_word_matrix",
    "load_pretrained",
]
