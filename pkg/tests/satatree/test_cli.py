"""Tests for satatree.cli (the ``python -m satatree`` commands)."""

import pandas as pd
import pytest

from satatree.cli import join_parses, main, node_projections
from satatree.errors import DatasetFormatError
from satatree.training import BEST_CHECKPOINT, train
from satatree.treebank import load_cluster_map, load_dataset

CLUSTERS = load_cluster_map()

PARSES = [
    "(S (NP (PRP It)) (VP (VBZ works)))",
    "(S (NP (DT the) (NN plot)) (VP (VBZ drags)))",
    "(S (NP (PRP It)) (VP (VBZ fails)))",
]

TOY = ["encoder.d_w=4", "encoder.d_h=6", "encoder.d_T=2", "head.d_s=6", "train.epochs=1", "train.batch_size=2"]


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def _sets(tmp_path, *extra):
    args = []
    for item in [f"data.out_dir={tmp_path / 'run'}", *TOY, *extra]:
        args += ["--set", item]
    return args


def _trained(tmp_path):
    parses = _write(tmp_path / "parses.txt", PARSES)
    labels = _write(tmp_path / "labels.txt", ["1", "0", "0"])
    data = str(tmp_path / "train.jsonl")
    assert main(["convert", "--parses", parses, "--labels", labels, "--format", "labels", "--out", data]) == 0
    assert main(["train", "toy", *_sets(tmp_path, f"data.train={data}")]) == 0
    return data


def test_join_parses_with_integer_labels():
    examples, dropped = join_parses(PARSES, ["1", "0", "0"], "labels", CLUSTERS)
    assert dropped == 0
    assert [e.label for e in examples] == [1, 0, 0]
    assert examples[1].tokens == ["the", "plot", "drags"]


def test_join_parses_snli_drops_unlabeled_pairs():
    pairs = [f"{PARSES[0]}\t{PARSES[1]}", f"{PARSES[1]}\t{PARSES[2]}"]
    examples, dropped = join_parses(pairs, ["entailment", "-"], "snli", CLUSTERS)
    assert dropped == 1
    assert examples[0].is_pair
    assert examples[0].hypothesis_tokens == ["the", "plot", "drags"]


def test_join_parses_reports_the_failing_line():
    with pytest.raises(DatasetFormatError) as info:
        join_parses([PARSES[0], "(S (NP"], ["1", "0"], "labels", CLUSTERS)
    assert info.value.line == 2


def test_convert_writes_a_dataset(tmp_path, capsys):
    parses = _write(tmp_path / "parses.txt", PARSES)
    labels = _write(tmp_path / "labels.txt", ["1", "0", "0"])
    out = tmp_path / "data.jsonl"
    assert main(["convert", "--parses", parses, "--labels", labels, "--format", "labels", "--out", str(out)]) == 0
    assert "records: 3" in capsys.readouterr().out
    assert len(load_dataset(out, CLUSTERS)) == 3


def test_convert_sst2_drops_neutral_roots(tmp_path, capsys):
    parses = _write(tmp_path / "parses.txt", PARSES[:1] * 2)
    labels = _write(tmp_path / "labels.txt", ["(3 (2 It) (4 works))", "(2 (2 It) (2 works))"])
    out = tmp_path / "data.jsonl"
    assert main(["convert", "--parses", parses, "--labels", labels, "--format", "sst2", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "records: 1" in printed
    assert "dropped: 1" in printed


def test_convert_count_mismatch_writes_nothing(tmp_path, capsys):
    parses = _write(tmp_path / "parses.txt", PARSES)
    labels = _write(tmp_path / "labels.txt", ["1", "0"])
    out = tmp_path / "data.jsonl"
    assert main(["convert", "--parses", parses, "--labels", labels, "--format", "labels", "--out", str(out)]) == 1
    assert "DatasetFormatError" in capsys.readouterr().err
    assert not out.exists()


def test_count_params_snli(capsys):
    assert main(["count-params", "snli"]) == 0
    assert capsys.readouterr().out.strip().splitlines()[-1] == "total 3293967"


def test_gradcheck_passes(capsys):
    assert main(["gradcheck"]) == 0
    assert "PASS max_rel_err < 0.0001" in capsys.readouterr().out


def test_equiv_passes(capsys):
    assert main(["equiv", "--trees", "10"]) == 0
    assert capsys.readouterr().out.strip() == "PASS max_dev = 0 over 10 trees"


@pytest.mark.parametrize("command", ["gradcheck", "equiv"])
def test_verification_commands_run_on_the_fixed_small_model(command):
    with pytest.raises(SystemExit) as exc:
        main([command, "snli"])
    assert exc.value.code == 2


def test_train_then_eval(tmp_path, capsys):
    data = _trained(tmp_path)
    assert (tmp_path / "run" / BEST_CHECKPOINT).exists()
    capsys.readouterr()
    assert main(["eval", "toy", *_sets(tmp_path), "--data", data]) == 0
    assert "(3 examples)" in capsys.readouterr().out


def test_eval_refuses_a_different_architecture(tmp_path, capsys):
    data = _trained(tmp_path)
    capsys.readouterr()
    assert main(["eval", "toy", *_sets(tmp_path, "encoder.d_h=8"), "--data", data]) == 1
    assert "refusing to evaluate" in capsys.readouterr().err


def test_missing_train_set_is_an_error(tmp_path, capsys):
    assert main(["train", "toy", *_sets(tmp_path, "data.train=null")]) == 1
    assert "no train set configured" in capsys.readouterr().err


def test_inspect_projects_every_node(tmp_path):
    _trained(tmp_path)
    ckpt = tmp_path / "run" / BEST_CHECKPOINT
    frame = node_projections(ckpt, PARSES[0])
    assert list(frame.columns) == ["node_span_text", "tag", "x", "y"]
    assert len(frame) == 3
    assert frame["node_span_text"].iloc[-1] == "It works"

    out = tmp_path / "nodes.csv"
    assert main(["inspect", "--checkpoint", str(ckpt), "--sentence", PARSES[0], "--out", str(out)]) == 0
    written = pd.read_csv(out)
    assert written["node_span_text"].tolist() == frame["node_span_text"].tolist()


def test_inspect_single_word_sentence(tmp_path):
    _trained(tmp_path)
    frame = node_projections(tmp_path / "run" / BEST_CHECKPOINT, "(NN plot)")
    assert frame[["x", "y"]].to_numpy().tolist() == [[0.0, 0.0]]
