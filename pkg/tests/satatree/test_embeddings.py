"""Tests for satatree.embeddings."""

import numpy as np
import pytest

from satatree.embeddings import (
    PAD,
    UNK,
    TagEmbedding,
    WordEmbedding,
    WordVocab,
    load_pretrained,
)
from satatree.errors import DatasetFormatError, DimensionError
from satatree.numeric import Parameter


def _vocab() -> WordVocab:
    return WordVocab.build([["the", "dog", "barks"], ["the", "cat"]])


def test_vocab_order_and_reserved_entries():
    vocab = _vocab()
    assert vocab.tokens == [PAD, UNK, "the", "barks", "cat", "dog"]
    assert vocab.pad_id == 0 and vocab.unk_id == 1
    assert vocab.encode(["the", "zebra"]) == [2, 1]
    assert "dog" in vocab and "zebra" not in vocab


def test_vocab_min_count():
    vocab = WordVocab.build([["a", "a", "b"]], min_count=2)
    assert vocab.tokens == [PAD, UNK, "a"]


def test_vocab_must_start_with_reserved_tokens():
    with pytest.raises(ValueError, match="must start with"):
        WordVocab(["the", PAD, UNK])


def test_random_word_embedding_has_zero_padding_row():
    emb = WordEmbedding.random(_vocab(), 4, np.random.default_rng(0))
    assert emb.param.shape == (6, 4)
    assert not emb.param.value[0].any()
    assert np.all(np.abs(emb.param.value) <= 0.05)
    assert emb.param.decay is False


def test_lookup_words():
    emb = WordEmbedding.from_matrix(np.arange(12.0).reshape(6, 2))
    assert emb.lookup_words([3, 1]).data.tolist() == [[6.0, 7.0], [2.0, 3.0]]


def test_tag_embedding_shape_and_range():
    tags = TagEmbedding.random(5, np.random.default_rng(0))
    assert tags.param.shape == (23, 5)
    assert np.all(np.abs(tags.param.value) <= 0.005)
    assert tags.lookup_tag(4).shape == (5,)
    with pytest.raises(DimensionError, match="23 rows"):
        TagEmbedding(Parameter("embed.tags", np.zeros((12, 5))))


def test_load_pretrained_copies_rows_and_reports_coverage(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("3 2\nthe 1.0 2.0\ndog -1 0.5\nzebra 9 9\n", encoding="utf-8")
    emb, coverage = load_pretrained(path, _vocab(), 2, np.random.default_rng(0))
    np.testing.assert_array_equal(emb.param.value[2], [1.0, 2.0])
    np.testing.assert_array_equal(emb.param.value[5], [-1.0, 0.5])
    assert coverage.found == 2
    assert set(coverage.oov_tokens) == {UNK, "barks", "cat"}
    assert coverage.ratio == pytest.approx(2 / 5)
    assert np.all(np.abs(emb.param.value[4]) <= 0.05)


def test_load_pretrained_accepts_tokens_with_spaces(tmp_path):
    path = tmp_path / "vectors.txt"
    path.write_text("new york 1 2\n", encoding="utf-8")
    vocab = WordVocab([PAD, UNK, "new york"])
    emb, coverage = load_pretrained(path, vocab, 2, np.random.default_rng(0))
    assert coverage.found == 1
    np.testing.assert_array_equal(emb.param.value[2], [1.0, 2.0])


@pytest.mark.parametrize(
    "content, message",
    [("the 1.0\n", "line 1: expected 2 values"), ("the 1 2 3\n", "expected 2 values, got 3"), ("the 1 x\n", "malformed")],
)
def test_load_pretrained_errors(tmp_path, content, message):
    path = tmp_path / "vectors.txt"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(DatasetFormatError, match=message):
        load_pretrained(path, _vocab(), 2, np.random.default_rng(0))
