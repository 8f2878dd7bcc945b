"""
Command-line entry point: ``python -m satatree <command>``.

Results go to stdout, logs to stderr. Any satatree error (or invalid configuration) is reported as
``error: <Class>: <message>`` with exit status 1; outputs are written atomically, so a failed
command leaves nothing behind.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np
import pandas as pd

from satatree.config import PACKAGED_TASKS, RunConfig, load_config
from satatree.errors import CheckpointError, DatasetFormatError, SataError, TreeParseError
from satatree.model import itemize_params
from satatree.numeric import pca_project
from satatree.training import (
    BEST_CHECKPOINT,
    cross_validate,
    evaluate,
    load_checkpoint,
    train,
)
from satatree.treebank import ClusterMap, Dataset, Example, load_cluster_map, load_dataset, write_dataset
from satatree.treebank.sst import merge_sst_labels, parse_label, parse_nli_label
from satatree.treebank.trees import BinaryTree, parse_binary
from satatree.utils.files import atomic_write_text
from satatree.verify import (
    EQUIV_TOLERANCE,
    GRAD_TOLERANCE,
    gradient_suite,
    spinn_equivalence,
)

logger = logging.getLogger("satatree")

CONVERT_FORMATS = ("sst2", "sst5", "labels", "snli")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _read_lines(path: Path | str) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line for line in f.read().splitlines() if line.strip()]


def _tree(text: str, clusters: ClusterMap, number: int) -> BinaryTree:
    try:
        return parse_binary(text, clusters)
    except (TreeParseError, ValueError) as e:
        raise DatasetFormatError(str(e), number) from e


def join_parses(
    parses: Sequence[str],
    labels: Sequence[str],
    fmt: str,
    clusters: ClusterMap,
    n_classes: int | None = None,
) -> tuple[Dataset, int]:
    """Pair parse lines with label lines by index. Returns the examples and the dropped count.

    ``sst2``/``sst5`` take SST sentiment trees as labels (neutral roots are dropped under sst2);
    ``labels`` takes one integer per line; ``snli`` takes ``premise<TAB>hypothesis`` parse pairs and
    NLI labels, dropping pairs without a gold label (``-``).
    """

    if fmt not in CONVERT_FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(CONVERT_FORMATS)}")
    if len(parses) != len(labels):
        raise DatasetFormatError(f"{len(parses)} parses but {len(labels)} labels")

    examples: Dataset = []
    dropped = 0
    for number, (parse, label) in enumerate(zip(parses, labels), start=1):
        try:
            if fmt in ("sst2", "sst5"):
                example = merge_sst_labels(label, _tree(parse, clusters, number), fmt)  # type: ignore[arg-type]
            elif fmt == "labels":
                tree = _tree(parse, clusters, number)
                example = Example(parse_label(label, n_classes), tree.tokens(), tree)
            else:
                example = _nli_example(parse, label, clusters, number)
        except DatasetFormatError as e:
            if e.line is not None:
                raise
            raise DatasetFormatError(str(e), number) from e
        if example is None:
            dropped += 1
            continue
        examples.append(example)
    return examples, dropped


def _nli_example(parse: str, label: str, clusters: ClusterMap, number: int) -> Example | None:
    parts = parse.split("\t")
    if len(parts) != 2:
        raise DatasetFormatError(f"expected premise and hypothesis separated by a tab, got {len(parts)} fields", number)
    if label.strip() == "-":
        return None
    premise, hypothesis = (_tree(p, clusters, number) for p in parts)
    return Example(
        label=parse_nli_label(label),
        tokens=premise.tokens(),
        tree=premise,
        hypothesis_tokens=hypothesis.tokens(),
        hypothesis=hypothesis,
    )


def _clusters(config: RunConfig) -> ClusterMap:
    return load_cluster_map(config.data.cluster_map)


def _dataset(path: str | None, what: str, clusters: ClusterMap) -> Dataset:
    if path is None:
        raise ValueError(f"no {what} set configured (set data.{what}=<path>)")
    return load_dataset(path, clusters)


def cmd_convert(args: argparse.Namespace) -> int:
    clusters = load_cluster_map(args.cluster_map)
    examples, dropped = join_parses(
        _read_lines(args.parses), _read_lines(args.labels), args.format, clusters, args.n_classes
    )
    write_dataset(args.out, examples)
    print(f"records: {len(examples)}")
    print(f"dropped: {dropped}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.overrides)
    clusters = _clusters(config)
    train_set = _dataset(config.data.train, "train", clusters)
    dev_set = load_dataset(config.data.dev, clusters) if config.data.dev else None
    best = train(train_set, config, dev_set=dev_set, clusters=clusters, resume=args.resume)
    print(f"best epoch {best.epoch}: {config.train.selection} = {best.best_metric:.4f}")
    print(f"checkpoint: {Path(config.data.out_dir) / BEST_CHECKPOINT}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.overrides)
    path = args.checkpoint or Path(config.data.out_dir) / BEST_CHECKPOINT
    ckpt = load_checkpoint(path)
    if ckpt.digest != config.digest():
        raise CheckpointError(
            f"{path} was trained with a different architecture (digest {ckpt.digest[:12]}, "
            f"config {config.digest()[:12]}); refusing to evaluate"
        )
    data = args.data or getattr(config.data, args.split)
    dataset = _dataset(data, args.split, ckpt.clusters)
    report = evaluate(dataset, ckpt)
    print(f"accuracy: {report.accuracy:.4f} ({report.n_examples} examples)")
    print(report.confusion.to_string())
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = gradient_suite(seed=args.seed, eps=args.eps)
    for name, result in results.items():
        print(f"{name:<28} {result.max_rel_err:.3e}  ({result.coordinates} coordinates)")
    worst = max(results, key=lambda name: results[name].max_rel_err)
    max_err = results[worst].max_rel_err
    if max_err < GRAD_TOLERANCE:
        print(f"PASS max_rel_err < {GRAD_TOLERANCE:g}")
        return 0
    print(f"FAIL max_rel_err = {max_err:.3e} in {worst} ({results[worst].worst_parameter})")
    return 1


def cmd_equiv(args: argparse.Namespace) -> int:
    report = spinn_equivalence(n_trees=args.trees, max_leaves=args.max_leaves, seed=args.seed)
    max_dev = max(report.max_dev, report.batched_max_dev)
    verdict = "PASS" if max_dev <= EQUIV_TOLERANCE else "FAIL"
    print(f"{verdict} max_dev = {max_dev:g} over {report.trees} trees")
    return 0 if verdict == "PASS" else 1


def node_projections(ckpt_path: Path | str, sentence: str) -> pd.DataFrame:
    """2-D PCA of every node's hidden state, one row per node in post-order."""

    model = load_checkpoint(ckpt_path).to_model()
    tree = parse_binary(sentence, model.clusters)
    tokens = tree.tokens()
    encoding = model.encode(tree)
    states = np.stack([node.word.h.data for node in encoding.nodes])
    xy = pca_project(states, k=2) if len(states) > 1 else np.zeros((1, 2))
    return pd.DataFrame(
        {
            "node_span_text": [" ".join(tokens[a:b]) for a, b in (n.span for n in encoding.nodes)],
            "tag": [n.tag for n in encoding.nodes],
            "x": xy[:, 0],
            "y": xy[:, 1],
        }
    )


def cmd_inspect(args: argparse.Namespace) -> int:
    frame = node_projections(args.checkpoint, args.sentence)
    csv = frame.to_csv(index=False)
    if args.out:
        atomic_write_text(args.out, csv)
        logger.info("wrote %d node projections to %s", len(frame), args.out)
    else:
        sys.stdout.write(csv)
    return 0


def cmd_count_params(args: argparse.Namespace) -> int:
    config = load_config(args.config, args.overrides)
    items = itemize_params(config, args.vocab_size, include_head=not args.no_head)
    frame = pd.DataFrame({"tensor": list(items), "count": list(items.values())})
    print(frame.to_string(index=False))
    print(f"total {int(frame['count'].sum())}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    rows = []
    for name in args.configs:
        config = load_config(name, args.overrides)
        clusters = _clusters(config)
        train_set = _dataset(config.data.train, "train", clusters)
        if args.folds:
            scores = cross_validate(train_set, config, args.folds, clusters)
        else:
            dev_set = _dataset(config.data.dev, "dev", clusters)
            best = train(train_set, config, dev_set=dev_set, clusters=clusters)
            scores = [evaluate(dev_set, best).accuracy]
        rows.append({"config": str(name), "runs": len(scores), "mean_acc": float(np.mean(scores)), "std_acc": float(np.std(scores))})
    print(pd.DataFrame(rows).to_string(index=False))
    return 0


def _add_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help=f"config file or packaged task ({', '.join(PACKAGED_TASKS)})")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config value, e.g. train.lr=0.0005 (repeatable)",
    )


def cli() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satatree", description="Tag-augmented tree-LSTM sentence encoder")
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="logging threshold for stderr (default: INFO)",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("convert", help="join parser output with labels into a dataset file")
    p.add_argument("--parses", required=True, help="one PTB parse per line (premise<TAB>hypothesis for snli)")
    p.add_argument("--labels", required=True, help="label file, one entry per parse line")
    p.add_argument("--format", required=True, choices=CONVERT_FORMATS)
    p.add_argument("--out", required=True, help="dataset file to write")
    p.add_argument("--cluster-map", default=None, help="tag cluster file (default: packaged table)")
    p.add_argument("--n-classes", type=int, default=None, help="reject labels >= this (labels format)")
    p.set_defaults(handler=cmd_convert)

    p = commands.add_parser("train", help="train a model; writes checkpoints and metrics to data.out_dir")
    _add_config(p)
    p.add_argument("--resume", action="store_true", help="continue from last.ckpt in the output directory")
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("eval", help="accuracy and confusion matrix of a checkpoint")
    _add_config(p)
    p.add_argument("--checkpoint", default=None, help="default: <out_dir>/best.ckpt")
    p.add_argument("--split", default="test", choices=["train", "dev", "test"])
    p.add_argument("--data", default=None, help="dataset file; overrides --split")
    p.set_defaults(handler=cmd_eval)

    p = commands.add_parser("gradcheck", help="finite-difference check of every differentiable component")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(handler=cmd_gradcheck)

    p = commands.add_parser("equiv", help="compare shift-reduce and recursive encoding on random trees")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--max-leaves", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_equiv)

    p = commands.add_parser("inspect", help="CSV of 2-D projections of every node state of one sentence")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sentence", required=True, help="the sentence as a PTB parse")
    p.add_argument("--out", default=None, help="CSV file (default: stdout)")
    p.set_defaults(handler=cmd_inspect)

    p = commands.add_parser("count-params", help="itemized trainable parameter count")
    _add_config(p)
    p.add_argument("--vocab-size", type=int, default=0, help="include a word table of this size")
    p.add_argument("--no-head", action="store_true", help="encoder only")
    p.set_defaults(handler=cmd_count_params)

    p = commands.add_parser("grid", help="train several configs and compare dev or k-fold accuracy")
    p.add_argument("configs", nargs="+")
    p.add_argument("--folds", type=int, default=0, help="k-fold cross-validation on the training set")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(handler=cmd_grid)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = cli().parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        return args.handler(args)
    except (SataError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


__all__ = ["cli", "join_parses", "main", "node_projections"]
