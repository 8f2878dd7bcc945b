"""
The training loop, evaluation and k-fold cross-validation.

Each mini-batch is split into ``train.workers`` contiguous shards. Every shard runs forward and
backward on a private tape (in a thread pool when there is more than one), then the aggregator
sums the shard gradients in shard order, clips the global norm, takes one optimizer step and folds
the averaged batch-norm statistics into the running estimates. Parameters only change between
steps.

Output directory layout: ``best.ckpt`` (best model so far by the selection criterion),
``last.ckpt`` (end of the latest epoch, with optimizer and generator state for resuming),
``metrics.jsonl`` (one record per epoch) and ``config.yaml`` (the resolved run configuration).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from satatree.config import RunConfig
from satatree.embeddings import WordVocab, load_pretrained
from satatree.errors import CheckpointError, DivergenceError, NonFiniteError
from satatree.model import BatchStats, SataModel, update_running_stats
from satatree.numeric import Parameter, Tape, accumulate, scale
from satatree.numeric.tensor import GradValue
from satatree.training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from satatree.training.optim import Optimizer
from satatree.treebank.clusters import ClusterMap, load_cluster_map
from satatree.treebank.dataset import Dataset, Example
from satatree.formats import YAMLFormat
from satatree.utils.files import atomic_write_text

logger = logging.getLogger(__name__)

BEST_CHECKPOINT = "best.ckpt"
LAST_CHECKPOINT = "last.ckpt"
METRICS_FILE = "metrics.jsonl"
CONFIG_FILE = "config.yaml"


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_acc: float | None
    grad_norm_mean: float
    skipped_steps: int


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    n_examples: int
    confusion: pd.DataFrame
    """Counts indexed by gold class (rows) and predicted class (columns)."""


def build_vocab(dataset: Dataset, min_count: int = 1) -> WordVocab:
    sentences: list[list[str]] = []
    for example in dataset:
        sentences.append(example.tokens)
        if example.hypothesis_tokens is not None:
            sentences.append(example.hypothesis_tokens)
    return WordVocab.build(sentences, min_count)


def build_model(
    config: RunConfig,
    dataset: Dataset,
    clusters: ClusterMap,
    rng: np.random.Generator,
) -> SataModel:
    vocab = build_vocab(dataset, config.data.min_count)
    word_vectors = None
    if config.data.embeddings:
        embedding, _ = load_pretrained(
            config.data.embeddings,
            vocab,
            config.encoder.d_w,
            rng,
            trainable=config.encoder.fine_tune_words,
            dtype=np.dtype(config.encoder.dtype),
        )
        word_vectors = embedding.param.value
    logger.info("vocabulary: %d entries", len(vocab))
    return SataModel.create(config, vocab, clusters, rng, word_vectors)


def _shards(batch: Sequence[Example], workers: int) -> list[list[Example]]:
    n = min(workers, len(batch))
    bounds = np.linspace(0, len(batch), n + 1).astype(int)
    return [list(batch[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]


@dataclass
class _ShardResult:
    grads: dict[Parameter, GradValue]
    loss: float
    stats: BatchStats | None


def _run_shard(
    model: SataModel,
    shard: list[Example],
    weight: float,
    rng: np.random.Generator,
    phrase_supervision: bool,
) -> _ShardResult:
    with Tape() as tape:
        result = model.forward(shard, train=True, rng=rng, phrase_supervision=phrase_supervision)
        loss = scale(result.loss, weight)
    return _ShardResult(tape.gradients(loss), loss.item(), result.stats)


def accuracy(model: SataModel, dataset: Dataset) -> float:
    if not dataset:
        return 0.0
    predictions = model.predict(dataset)
    gold = np.asarray([e.label for e in dataset])
    return float(np.mean(predictions == gold))


def evaluate(dataset: Dataset, model: SataModel | Checkpoint) -> EvalReport:
    """Accuracy and confusion matrix of ``model`` (eval mode) on ``dataset``."""

    if not dataset:
        raise ValueError("cannot evaluate on an empty dataset")
    if isinstance(model, Checkpoint):
        model = model.to_model()
    n_classes = model.config.head.n_classes
    predictions = model.predict(dataset)
    gold = np.asarray([e.label for e in dataset])
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (gold, predictions), 1)
    confusion = pd.DataFrame(
        counts,
        index=pd.Index(range(n_classes), name="gold"),
        columns=pd.Index(range(n_classes), name="predicted"),
    )
    return EvalReport(float(np.mean(predictions == gold)), len(dataset), confusion)


def _write_config(path: Path, config: RunConfig) -> None:
    YAMLFormat(path).dump(config.model_dump(mode="json"))


def _write_metrics(path: Path, records: list[EpochRecord]) -> None:
    frame = pd.DataFrame([asdict(r) for r in records])
    atomic_write_text(path, frame.to_json(orient="records", lines=True, double_precision=15).rstrip("\n") + "\n")


def _read_metrics(path: Path, up_to_epoch: int) -> list[EpochRecord]:
    if not path.exists():
        return []
    frame = pd.read_json(path, orient="records", lines=True)
    records = []
    for row in frame.to_dict(orient="records"):
        if int(row["epoch"]) > up_to_epoch:
            continue
        dev_acc = row.get("dev_acc")
        records.append(
            EpochRecord(
                epoch=int(row["epoch"]),
                train_loss=float(row["train_loss"]),
                dev_acc=None if dev_acc is None or pd.isna(dev_acc) else float(dev_acc),
                grad_norm_mean=float(row["grad_norm_mean"]),
                skipped_steps=int(row["skipped_steps"]),
            )
        )
    return records


def _improved(metric: float, best: float | None, higher_is_better: bool) -> bool:
    if best is None:
        return True
    return metric > best if higher_is_better else metric < best


def train(
    train_set: Dataset,
    config: RunConfig,
    dev_set: Dataset | None = None,
    clusters: ClusterMap | None = None,
    resume: bool = False,
) -> Checkpoint:
    """Train on ``train_set`` and return the best checkpoint.

    Selection follows ``train.selection``; without a dev set the lowest training loss wins.
    With ``resume`` the run continues from ``last.ckpt`` in the output directory up to
    ``train.epochs``, reproducing an uninterrupted run exactly.
    """

    if not train_set:
        raise ValueError("training set is empty")
    tc = config.train
    out_dir = Path(config.data.out_dir)
    use_dev = bool(dev_set) and tc.selection == "dev_accuracy"

    records: list[EpochRecord] = []
    best: Checkpoint | None = None
    best_metric: float | None = None
    start_epoch = 0

    if resume:
        last = load_checkpoint(out_dir / LAST_CHECKPOINT)
        if last.digest != config.digest():
            raise CheckpointError(
                f"{out_dir / LAST_CHECKPOINT} was written for a different architecture "
                f"(digest {last.digest[:12]}, config {config.digest()[:12]})"
            )
        model = last.to_model()
        model.config = config
        rng = last.restore_rng()
        optimizer = Optimizer(model.parameters(), tc)
        optimizer.load_state_arrays({k: v for k, v in last.tensors.items() if k.startswith("optim/")})
        start_epoch = last.epoch
        best_metric = last.best_metric
        if (out_dir / BEST_CHECKPOINT).exists():
            best = load_checkpoint(out_dir / BEST_CHECKPOINT)
        records = _read_metrics(out_dir / METRICS_FILE, start_epoch)
        logger.info("resuming from epoch %d", start_epoch)
    else:
        rng = np.random.default_rng(tc.seed)
        clusters = clusters or load_cluster_map(config.data.cluster_map)
        model = build_model(config, train_set, clusters, rng)
        optimizer = Optimizer(model.parameters(), tc)
        _write_config(out_dir / CONFIG_FILE, config)

    pool = ThreadPoolExecutor(max_workers=tc.workers) if tc.workers > 1 else None
    try:
        for epoch in range(start_epoch + 1, tc.epochs + 1):
            order = rng.permutation(len(train_set))
            losses: list[float] = []
            norms: list[float] = []
            skipped_before = optimizer.skipped

            for start in range(0, len(order), tc.batch_size):
                batch = [train_set[i] for i in order[start : start + tc.batch_size]]
                shards = _shards(batch, tc.workers)
                seeds = rng.integers(0, 2**63 - 1, size=len(shards))
                shard_rngs = [np.random.default_rng(int(s)) for s in seeds]
                weights = [len(s) / len(batch) for s in shards]
                args = (
                    [model] * len(shards),
                    shards,
                    weights,
                    shard_rngs,
                    [tc.phrase_supervision] * len(shards),
                )
                try:
                    if pool is None:
                        results = list(map(_run_shard, *args))
                    else:
                        results = list(pool.map(_run_shard, *args))
                except NonFiniteError as e:
                    raise DivergenceError(f"epoch {epoch}, batch starting at {start}: {e}") from e

                batch_loss = sum(r.loss for r in results)
                if not np.isfinite(batch_loss):
                    raise DivergenceError(f"epoch {epoch}, batch starting at {start}: loss is {batch_loss}")

                optimizer.zero_grad()
                for r in results:
                    accumulate(r.grads)
                norms.append(optimizer.clip())
                if optimizer.step():
                    update_running_stats(
                        model.buffers(),
                        [r.stats for r in results if r.stats is not None],
                        config.head.bn_momentum,
                    )
                losses.append(batch_loss * len(batch))

            record = EpochRecord(
                epoch=epoch,
                train_loss=float(sum(losses) / len(train_set)),
                dev_acc=accuracy(model, dev_set) if dev_set else None,
                grad_norm_mean=float(np.mean(norms)),
                skipped_steps=optimizer.skipped - skipped_before,
            )
            records.append(record)
            logger.info(
                "epoch %d: train_loss=%.5f dev_acc=%s grad_norm_mean=%.4f",
                epoch,
                record.train_loss,
                "n/a" if record.dev_acc is None else f"{record.dev_acc:.4f}",
                record.grad_norm_mean,
            )

            metric = record.dev_acc if use_dev and record.dev_acc is not None else record.train_loss
            if _improved(metric, best_metric, higher_is_better=use_dev):
                best_metric = metric
                best = Checkpoint.from_model(model, epoch=epoch, best_metric=metric)
                save_checkpoint(out_dir / BEST_CHECKPOINT, best)

            last = Checkpoint.from_model(
                model, optimizer.state_arrays(), epoch=epoch, best_metric=best_metric, rng=rng
            )
            save_checkpoint(out_dir / LAST_CHECKPOINT, last)
            _write_metrics(out_dir / METRICS_FILE, records)
    finally:
        if pool is not None:
            pool.shutdown()

    if best is None:
        raise CheckpointError("no epoch was run; nothing to return")
    return best


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """(train, held-out) index pairs; every example is held out exactly once."""

    if not 2 <= folds <= n:
        raise ValueError(f"need 2 <= folds <= {n}, got {folds}")
    order = rng.permutation(n)
    parts = np.array_split(order, folds)
    return [(np.concatenate(parts[:k] + parts[k + 1 :]), parts[k]) for k in range(folds)]


def cross_validate(dataset: Dataset, config: RunConfig, folds: int, clusters: ClusterMap | None = None) -> list[float]:
    """Held-out accuracy of each fold, each trained in its own ``fold<k>`` output directory."""

    results = []
    splits = kfold_indices(len(dataset), folds, np.random.default_rng(config.train.seed))
    for k, (train_idx, held_idx) in enumerate(splits):
        fold_config = config.model_copy(
            update={"data": config.data.model_copy(update={"out_dir": str(Path(config.data.out_dir) / f"fold{k}")})}
        )
        held_out = [dataset[i] for i in held_idx]
        best = train([dataset[i] for i in train_idx], fold_config, dev_set=held_out, clusters=clusters)
        results.append(evaluate(held_out, best).accuracy)
        logger.info("fold %d/%d: accuracy %.4f", k + 1, folds, results[-1])
    return results


__all__ = [
    "BEST_CHECKPOINT",
    "CONFIG_FILE",
    "EpochRecord",
    "EvalReport",
    "LAST_CHECKPOINT",
    "METRICS_FILE",
    "accuracy",
    "build_model",
    "build_vocab",
    "cross_validate",
    "evaluate",
    "kfold_indices",
    "train",
]
