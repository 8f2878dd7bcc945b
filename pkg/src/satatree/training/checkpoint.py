"""
Binary checkpoint files.

Layout: the 8-byte magic ``SATACKPT``, a little-endian uint32 format version, a uint64 header
length, a UTF-8 JSON header, then the raw little-endian bytes of every tensor in header order.
The header carries the run configuration and its digest, epoch, best metric, the generator state,
the vocabulary, the tag cluster tables and the tensor index (name, dtype, shape).
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from satatree.config import RunConfig
from satatree.embeddings import WordVocab
from satatree.errors import CheckpointError
from satatree.formats import opaque_to_typed
from satatree.model import SataModel, SataParams
from satatree.treebank.clusters import ClusterMap
from satatree.utils.files import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"SATACKPT"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<8sIQ")


@dataclass
class Checkpoint:
    config: RunConfig
    vocab: list[str]
    clusters: ClusterMap
    tensors: dict[str, np.ndarray]
    epoch: int = 0
    best_metric: float | None = None
    rng_state: dict[str, Any] | None = None
    digest: str = field(default="")

    def __post_init__(self) -> None:
        if not self.digest:
            self.digest = self.config.digest()

    @classmethod
    def from_model(
        cls,
        model: SataModel,
        extra: dict[str, np.ndarray] | None = None,
        epoch: int = 0,
        best_metric: float | None = None,
        rng: np.random.Generator | None = None,
    ) -> Checkpoint:
        tensors = {name: value.copy() for name, value in model.params.state_arrays().items()}
        tensors.update({name: value.copy() for name, value in (extra or {}).items()})
        return cls(
            config=model.config,
            vocab=list(model.vocab.tokens),
            clusters=model.clusters,
            tensors=tensors,
            epoch=epoch,
            best_metric=best_metric,
            rng_state=rng.bit_generator.state if rng is not None else None,
        )

    def to_model(self) -> SataModel:
        vocab = WordVocab(self.vocab)
        params = SataParams.initialize(self.config, len(vocab), np.random.default_rng(0))
        params.load_state_arrays(self.tensors)
        return SataModel(self.config, vocab, self.clusters, params)

    def restore_rng(self) -> np.random.Generator:
        rng = np.random.default_rng()
        if self.rng_state is None:
            raise CheckpointError("checkpoint carries no generator state")
        rng.bit_generator.state = self.rng_state
        return rng


def _header(ckpt: Checkpoint, index: list[dict[str, Any]]) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "digest": ckpt.digest,
        "config": ckpt.config.model_dump(mode="json"),
        "epoch": ckpt.epoch,
        "best_metric": ckpt.best_metric,
        "rng_state": ckpt.rng_state,
        "vocab": ckpt.vocab,
        "clusters": {
            "word": dict(ckpt.clusters.word_tag_to_group),
            "phrase": dict(ckpt.clusters.phrase_tag_to_group),
        },
        "tensors": index,
    }
    return json.dumps(header, ensure_ascii=False).encode("utf-8")


def dump_checkpoint(ckpt: Checkpoint) -> bytes:
    index: list[dict[str, Any]] = []
    blobs: list[bytes] = []
    for name, value in ckpt.tensors.items():
        array = np.ascontiguousarray(value, dtype=value.dtype.newbyteorder("<"))
        index.append({"name": name, "dtype": array.dtype.str, "shape": list(array.shape)})
        blobs.append(array.tobytes())
    header = _header(ckpt, index)
    return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(header)) + header + b"".join(blobs)


def save_checkpoint(path: Path | str, ckpt: Checkpoint) -> None:
    atomic_write(path, dump_checkpoint(ckpt))
    logger.info("wrote checkpoint %s (epoch %d)", path, ckpt.epoch)


def parse_checkpoint(payload: bytes, source: str = "<checkpoint>") -> Checkpoint:
    if len(payload) < _PREAMBLE.size:
        raise CheckpointError(f"{source}: truncated preamble")
    magic, version, header_len = _PREAMBLE.unpack_from(payload)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source}: format version {version}, this build reads {FORMAT_VERSION}")
    start = _PREAMBLE.size
    try:
        header = json.loads(payload[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{source}: unreadable header: {e}") from e

    try:
        config = opaque_to_typed(header["config"], RunConfig)
    except ValueError as e:
        raise CheckpointError(f"{source}: {e}") from e
    if config.digest() != header["digest"]:
        raise CheckpointError(f"{source}: configuration does not match its recorded digest")

    offset = start + header_len
    tensors: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        dtype = np.dtype(entry["dtype"])
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + count * dtype.itemsize
        if end > len(payload):
            raise CheckpointError(f"{source}: tensor {entry['name']} runs past the end of the file")
        tensors[entry["name"]] = np.frombuffer(payload, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
        offset = end
    if offset != len(payload):
        raise CheckpointError(f"{source}: {len(payload) - offset} trailing bytes")

    return Checkpoint(
        config=config,
        vocab=list(header["vocab"]),
        clusters=ClusterMap(header["clusters"]["word"], header["clusters"]["phrase"]),
        tensors=tensors,
        epoch=int(header["epoch"]),
        best_metric=header["best_metric"],
        rng_state=header["rng_state"],
        digest=header["digest"],
    )


def load_checkpoint(path: Path | str) -> Checkpoint:
    with open(path, "rb") as f:
        return parse_checkpoint(f.read(), str(path))


__all__ = [
    "Checkpoint",
    "FORMAT_VERSION",
    "MAGIC",
    "dump_checkpoint",
    "load_checkpoint",
    "parse_checkpoint",
    "save_checkpoint",
]
