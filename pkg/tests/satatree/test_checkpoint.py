"""Tests for satatree.training.checkpoint."""

import struct

import numpy as np
import pytest

from satatree.errors import CheckpointError
from satatree.training import Checkpoint, Optimizer, dump_checkpoint, load_checkpoint, parse_checkpoint, save_checkpoint
from satatree.verify import random_model, tiny_config


def _checkpoint(**config_sections) -> Checkpoint:
    rng = np.random.default_rng(0)
    model = random_model(tiny_config(**config_sections), rng)
    optimizer = Optimizer(model.parameters(), model.config.train)
    for p in optimizer.params:
        p.grad[...] = 0.1
    optimizer.step()
    return Checkpoint.from_model(model, optimizer.state_arrays(), epoch=3, best_metric=0.75, rng=rng)


def test_bytes_round_trip_exactly():
    ckpt = _checkpoint(head={"batch_norm": True})
    payload = dump_checkpoint(ckpt)
    restored = parse_checkpoint(payload)
    assert dump_checkpoint(restored) == payload
    assert restored.epoch == 3
    assert restored.best_metric == 0.75
    assert restored.digest == ckpt.config.digest()
    assert "buffer/head.bn.running_var" in restored.tensors
    for name, value in ckpt.tensors.items():
        np.testing.assert_array_equal(restored.tensors[name], value)


def test_preamble_layout():
    payload = dump_checkpoint(_checkpoint())
    magic, version, header_len = struct.unpack_from("<8sIQ", payload)
    assert magic == b"SATACKPT"
    assert version == 1
    assert payload[20 : 20 + header_len].startswith(b"{")


def test_model_survives_round_trip(tmp_path):
    ckpt = _checkpoint()
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, ckpt)
    model = load_checkpoint(path).to_model()
    original = ckpt.to_model()
    assert model.vocab.tokens == original.vocab.tokens
    for name, p in original.named_parameters().items():
        np.testing.assert_array_equal(model.named_parameters()[name].value, p.value)
    assert dict(model.clusters.word_tag_to_group) == dict(original.clusters.word_tag_to_group)


def test_generator_state_is_restored():
    ckpt = parse_checkpoint(dump_checkpoint(_checkpoint()))
    a = ckpt.restore_rng().random(3)
    b = ckpt.restore_rng().random(3)
    np.testing.assert_array_equal(a, b)


def test_not_a_checkpoint():
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        parse_checkpoint(b"PK\x03\x04" + bytes(40))


def test_truncated_file():
    payload = dump_checkpoint(_checkpoint())
    with pytest.raises(CheckpointError, match="runs past the end"):
        parse_checkpoint(payload[:-8])
    with pytest.raises(CheckpointError, match="truncated preamble"):
        parse_checkpoint(payload[:10])


def test_trailing_bytes():
    with pytest.raises(CheckpointError, match="3 trailing bytes"):
        parse_checkpoint(dump_checkpoint(_checkpoint()) + b"abc")


def test_future_format_version():
    payload = bytearray(dump_checkpoint(_checkpoint()))
    payload[8:12] = struct.pack("<I", 2)
    with pytest.raises(CheckpointError, match="format version 2"):
        parse_checkpoint(bytes(payload))


def test_tampered_config_fails_digest_check():
    payload = dump_checkpoint(_checkpoint())
    tampered = payload.replace(b'"d_h":3', b'"d_h":4', 1).replace(b'"d_h": 3', b'"d_h": 4', 1)
    assert tampered != payload
    with pytest.raises(CheckpointError, match="digest"):
        parse_checkpoint(tampered)


def test_missing_tensor_is_reported():
    ckpt = _checkpoint()
    del ckpt.tensors["param/word.W_w"]
    with pytest.raises(CheckpointError, match="missing tensor param/word.W_w"):
        ckpt.to_model()
