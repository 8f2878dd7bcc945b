"""
Task heads on top of sentence vectors: an optional batch norm on the input, one ReLU layer, and a
linear layer to class logits. NLI pairs are first turned into matching features.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from satatree.config import HeadConfig
from satatree.errors import DimensionError
from satatree.model.params import SataParams
from satatree.numeric import (
    Tensor,
    abs_,
    add,
    batch_norm,
    concat,
    dropout,
    hadamard,
    log_softmax,
    matmul,
    mean,
    pick,
    relu,
    scale,
    softmax,
    stack,
    sub,
    transpose,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchStats:
    mean: np.ndarray
    var: np.ndarray
    rows: int


@dataclass(frozen=True)
class ClassifierParams:
    W_s: Tensor
    b_s: Tensor
    W_c: Tensor
    b_c: Tensor
    gamma: Tensor | None = None
    beta: Tensor | None = None
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None

    def __post_init__(self) -> None:
        d_s, d_in = self.W_s.shape
        if self.b_s.shape != (d_s,) or self.W_c.shape[1:] != (d_s,) or self.b_c.shape != self.W_c.shape[:1]:
            raise DimensionError(
                f"inconsistent classifier shapes W_s {self.W_s.shape}, b_s {self.b_s.shape}, "
                f"W_c {self.W_c.shape}, b_c {self.b_c.shape}"
            )
        if (self.gamma is None) != (self.beta is None):
            raise DimensionError("batch norm needs both gamma and beta")

    @classmethod
    def bind(cls, params: SataParams) -> ClassifierParams:
        bn = "head.bn.gamma" in params
        return cls(
            W_s=params["head.W_s"].tensor(),
            b_s=params["head.b_s"].tensor(),
            W_c=params["head.W_c"].tensor(),
            b_c=params["head.b_c"].tensor(),
            gamma=params["head.bn.gamma"].tensor() if bn else None,
            beta=params["head.bn.beta"].tensor() if bn else None,
            running_mean=params.buffers.get("head.bn.running_mean"),
            running_var=params.buffers.get("head.bn.running_var"),
        )

    @property
    def d_in(self) -> int:
        return self.W_s.shape[1]

    @property
    def n_classes(self) -> int:
        return self.W_c.shape[0]


def classifier_logits(
    inputs: Tensor,
    p: ClassifierParams,
    config: HeadConfig,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, BatchStats | None]:
    """Logits for a batch of input rows, plus the batch-norm statistics used in train mode."""

    if inputs.ndim != 2 or inputs.shape[1] != p.d_in:
        raise DimensionError(f"classifier expects rows of width {p.d_in}, got {inputs.shape}")

    x, stats = inputs, None
    if p.gamma is not None and p.beta is not None:
        assert p.running_mean is not None and p.running_var is not None
        x, mu, var = batch_norm(x, p.gamma, p.beta, p.running_mean, p.running_var, train, config.bn_eps)
        if train:
            stats = BatchStats(mu, var, x.shape[0])

    s = relu(add(matmul(x, transpose(p.W_s)), p.b_s))
    if train and config.classifier_dropout > 0.0:
        if rng is None:
            raise ValueError("classifier dropout needs a random generator")
        s = dropout(s, config.classifier_dropout, rng)
    return add(matmul(s, transpose(p.W_c)), p.b_c), stats


def classify(
    root: Tensor,
    p: ClassifierParams,
    config: HeadConfig,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Class distribution for a single sentence vector."""

    logits, _ = classifier_logits(stack([root]), p, config, train, rng)
    return softmax(logits)


def snli_features(premise: Tensor, hypothesis: Tensor) -> Tensor:
    """[p; h; |p - h|; p * h]."""

    if premise.shape != hypothesis.shape or premise.ndim != 1:
        raise DimensionError(f"premise {premise.shape} and hypothesis {hypothesis.shape} must be equal vectors")
    return concat([premise, hypothesis, abs_(sub(premise, hypothesis)), hadamard(premise, hypothesis)])


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(``logits``), one row per example."""

    if logits.ndim == 1:
        logits = stack([logits])
    n_classes = logits.shape[1]
    labels = list(labels)
    if len(labels) != logits.shape[0]:
        raise DimensionError(f"{len(labels)} labels for {logits.shape[0]} rows of logits")
    for label in labels:
        if not 0 <= label < n_classes:
            raise DimensionError(f"label {label} out of range for {n_classes} classes")
    return scale(mean(pick(log_softmax(logits), labels)), -1.0)


def update_running_stats(buffers: dict[str, np.ndarray], stats: Sequence[BatchStats], momentum: float) -> None:
    """Fold the average of per-shard batch statistics into the running estimates, in place.

    Shards of a single row carry a zero variance and are left out; if none remain, nothing changes.
    """

    if "head.bn.running_mean" not in buffers:
        return
    usable = [s for s in stats if s.rows > 1]
    if len(usable) < len(stats):
        logger.debug("left %d single-row shards out of the running statistics", len(stats) - len(usable))
    if not usable:
        return
    batch_mean = np.mean([s.mean for s in usable], axis=0)
    batch_var = np.mean([s.var for s in usable], axis=0)
    running_mean = buffers["head.bn.running_mean"]
    running_var = buffers["head.bn.running_var"]
    running_mean *= 1.0 - momentum
    running_mean += momentum * batch_mean
    running_var *= 1.0 - momentum
    running_var += momentum * batch_var


__all__ = [
    "BatchStats",
    "ClassifierParams",
    "classifier_logits",
    "classify",
    "cross_entropy",
    "snli_features",
    "update_running_stats",
]
