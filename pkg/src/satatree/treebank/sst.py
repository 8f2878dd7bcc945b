"""
Joining externally parsed trees with class labels: Stanford Sentiment Treebank trees (root and
phrase-level sentiment), one-integer-per-line label files, and NLI pair labels.
"""

from __future__ import annotations

from typing import Literal

from satatree.errors import DatasetFormatError, TreeParseError
from satatree.treebank.dataset import IGNORE_LABEL, Example
from satatree.treebank.trees import BinaryTree, ParseTree, parse_sexpr

LabelScheme = Literal["sst2", "sst5"]

NLI_LABELS = ("entailment", "neutral", "contradiction")


def map_sentiment(value: int, scheme: LabelScheme) -> int | None:
    """Map a 0-4 sentiment value to a class; None marks neutral under the binary scheme."""

    if not 0 <= value <= 4:
        raise DatasetFormatError(f"sentiment value {value} outside 0..4")
    if scheme == "sst5":
        return value
    if value == 2:
        return None
    return 0 if value < 2 else 1


def _sentiment(node: ParseTree) -> int:
    try:
        return int(node.tag)
    except ValueError:
        raise DatasetFormatError(f"malformed sentiment label {node.tag!r}") from None


def _sst_postorder(tree: ParseTree) -> list[ParseTree]:
    out: list[ParseTree] = []
    stack: list[tuple[ParseTree, bool]] = [(tree, False)]
    while stack:
        node, expanded = stack.pop()
        if node.is_leaf or expanded:
            out.append(node)
            continue
        stack.append((node, True))
        stack.extend((child, False) for child in reversed(node.children))
    return out


def _same_shape(sst: ParseTree, parse: BinaryTree) -> bool:
    stack: list[tuple[ParseTree, BinaryTree]] = [(sst, parse)]
    while stack:
        a, b = stack.pop()
        if a.is_leaf or b.is_leaf:
            if not (a.is_leaf and b.is_leaf):
                return False
            continue
        if len(a.children) != 2:
            return False
        assert b.left is not None and b.right is not None
        stack.append((a.children[1], b.right))
        stack.append((a.children[0], b.left))
    return True


def merge_sst_labels(sst_tree_line: str, parse: BinaryTree, scheme: LabelScheme) -> Example | None:
    """Build an Example from an SST line such as ``(3 (2 It) (4 works))`` and its parse.

    Returns None when the root is neutral under the binary scheme. Per-node labels are attached
    (post-order, -1 for nodes that carry no usable label) only when the SST tree and the parse have
    the same shape; otherwise the example is root-supervised only.
    """

    try:
        sst = parse_sexpr(sst_tree_line)
    except TreeParseError as e:
        raise DatasetFormatError(f"malformed SST tree: {e}") from e

    nodes = _sst_postorder(sst)
    values = [_sentiment(n) for n in nodes]
    label = map_sentiment(values[-1], scheme)
    if label is None:
        return None

    node_labels = None
    if _same_shape(sst, parse):
        mapped = [map_sentiment(v, scheme) for v in values]
        node_labels = [IGNORE_LABEL if m is None else m for m in mapped]

    return Example(label=label, tokens=parse.tokens(), tree=parse, node_labels=node_labels)


def parse_label(text: str, n_classes: int | None = None) -> int:
    try:
        label = int(text.strip())
    except ValueError:
        raise DatasetFormatError(f"malformed label {text.strip()!r}") from None
    if label < 0 or (n_classes is not None and label >= n_classes):
        raise DatasetFormatError(f"label {label} out of range")
    return label


def parse_nli_label(text: str) -> int:
    value = text.strip().lower()
    if value in NLI_LABELS:
        return NLI_LABELS.index(value)
    return parse_label(value, len(NLI_LABELS))


__all__ = [
    "LabelScheme",
    "NLI_LABELS",
    "map_sentiment",
    "merge_sst_labels",
    "parse_label",
    "parse_nli_label",
]
