"""Tests for satatree.config (packaged tasks, overrides, validation, digest)."""

import pytest

from satatree.config import PACKAGED_TASKS, RunConfig, apply_overrides, load_config


@pytest.mark.parametrize("task", PACKAGED_TASKS)
def test_packaged_tasks_validate(task):
    assert isinstance(load_config(task), RunConfig)


def test_snli_task():
    config = load_config("snli")
    assert config.head.task == "nli"
    assert config.head.n_classes == 3
    assert config.head.d_s == 1024


def test_overrides_use_dot_notation():
    config = load_config("toy", ["train.lr=0.5", "encoder.tag_mode=none", "head.batch_norm=true"])
    assert config.train.lr == 0.5
    assert config.encoder.tag_mode == "none"
    assert config.head.batch_norm is True


def test_malformed_override():
    with pytest.raises(ValueError, match="section.key=value"):
        apply_overrides({}, ["train.lr"])


def test_invalid_value_is_rejected():
    with pytest.raises(ValueError, match="invalid RunConfig: encoder.leaf_mode"):
        load_config("toy", ["encoder.leaf_mode=gru"])


def test_unknown_key_is_rejected():
    with pytest.raises(ValueError, match="encoder.width: Extra inputs are not permitted"):
        load_config("toy", ["encoder.width=3"])


def test_config_from_path(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("encoder:\n  d_h: 7\ntrain:\n  epochs: 2\n", encoding="utf-8")
    config = load_config(path)
    assert config.encoder.d_h == 7
    assert config.train.epochs == 2
    assert config.encoder.d_w == 300


def test_digest_tracks_architecture_only():
    base = load_config("toy")
    assert base.digest() == load_config("toy", ["train.lr=0.1", "data.out_dir=elsewhere"]).digest()
    assert base.digest() != load_config("toy", ["encoder.d_T=9"]).digest()
    assert len(base.digest()) == 64
