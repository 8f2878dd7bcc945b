"""
Labeled examples and their line-delimited interchange format.

One JSON record per line with fields ``label`` (int), ``tokens`` (string list), ``sexpr`` (the
tagged binary tree), optional ``node_labels`` (post-order, -1 = unlabeled) and, for sentence
pairs, ``hypothesis_tokens`` / ``hypothesis_sexpr``. Unknown fields are ignored with a warning.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel, ConfigDict, ValidationError

from satatree.errors import DatasetFormatError, TreeParseError
from satatree.treebank.clusters import ClusterMap
from satatree.treebank.trees import BinaryTree, parse_sexpr, to_binary
from satatree.utils.files import atomic_write

logger = logging.getLogger(__name__)

IGNORE_LABEL = -1


@dataclass
class Example:
    label: int
    tokens: list[str]
    tree: BinaryTree
    node_labels: list[int] | None = None
    hypothesis_tokens: list[str] | None = None
    hypothesis: BinaryTree | None = None

    def __post_init__(self) -> None:
        if self.tokens != self.tree.tokens():
            raise ValueError("tokens must equal the in-order leaf tokens of the tree")
        if self.node_labels is not None and len(self.node_labels) != 2 * len(self.tokens) - 1:
            raise ValueError(
                f"{len(self.node_labels)} node labels for a tree with {2 * len(self.tokens) - 1} nodes"
            )
        if (self.hypothesis is None) != (self.hypothesis_tokens is None):
            raise ValueError("hypothesis tokens and tree must be given together")
        if self.hypothesis is not None and self.hypothesis_tokens != self.hypothesis.tokens():
            raise ValueError("hypothesis tokens must equal the leaf tokens of the hypothesis tree")

    @property
    def is_pair(self) -> bool:
        return self.hypothesis is not None


Dataset = list[Example]


class ExampleRecord(BaseModel):
    model_config = ConfigDict(extra="allow")

    label: int
    tokens: list[str]
    sexpr: str
    node_labels: list[int] | None = None
    hypothesis_tokens: list[str] | None = None
    hypothesis_sexpr: str | None = None

    @classmethod
    def from_example(cls, example: Example) -> ExampleRecord:
        return cls(
            label=example.label,
            tokens=list(example.tokens),
            sexpr=example.tree.to_sexpr(),
            node_labels=example.node_labels,
            hypothesis_tokens=example.hypothesis_tokens,
            hypothesis_sexpr=example.hypothesis.to_sexpr() if example.hypothesis else None,
        )

    def to_example(self, clusters: ClusterMap) -> Example:
        hypothesis = None
        if self.hypothesis_sexpr is not None:
            hypothesis = to_binary(parse_sexpr(self.hypothesis_sexpr), clusters)
        return Example(
            label=self.label,
            tokens=list(self.tokens),
            tree=to_binary(parse_sexpr(self.sexpr), clusters),
            node_labels=self.node_labels,
            hypothesis_tokens=self.hypothesis_tokens,
            hypothesis=hypothesis,
        )


def parse_dataset(lines: list[str], clusters: ClusterMap, source: str = "<dataset>") -> Dataset:
    examples: Dataset = []
    warned: set[str] = set()
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = ExampleRecord.model_validate_json(line)
            example = record.to_example(clusters)
        except ValidationError as e:
            raise DatasetFormatError(f"{source}: invalid record: {e}", number) from e
        except (TreeParseError, ValueError) as e:
            raise DatasetFormatError(f"{source}: {e}", number) from e
        for name in (record.model_extra or {}).keys() - warned:
            logger.warning("%s: ignoring unknown field %r (first seen on line %d)", source, name, number)
            warned.add(name)
        examples.append(example)
    return examples


def load_dataset(path: Path | str, clusters: ClusterMap) -> Dataset:
    with open(path, encoding="utf-8") as f:
        examples = parse_dataset(f.read().splitlines(), clusters, str(path))
    logger.info("loaded %d examples from %s", len(examples), path)
    return examples


def dump_dataset(examples: Dataset) -> str:
    return "".join(
        ExampleRecord.from_example(e).model_dump_json(exclude_none=True) + "\n" for e in examples
    )


def write_dataset(path: Path | str, examples: Dataset) -> None:
    atomic_write(path, dump_dataset(examples).encode("utf-8"))
    logger.info("wrote %d examples to %s", len(examples), path)


__all__ = [
    "Dataset",
    "Example",
    "ExampleRecord",
    "IGNORE_LABEL",
    "dump_dataset",
    "load_dataset",
    "parse_dataset",
    "write_dataset",
]
