"""
Coarse tag clustering. Word-level (POS) tags fall into the 12 universal POS groups, phrase-level
tags into 11 functional groups, giving 23 categories. Word groups take ids 0-11 and phrase groups
12-22, in the order listed below.

The mapping ships as ``tag_clusters.tsv`` (lines ``RAWTAG<TAB>GROUP`` under ``[word]`` and
``[phrase]`` headers) and can be replaced by passing another file to ``load_cluster_map``.
"""

from __future__ import annotations

import importlib.resources
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from satatree.errors import DatasetFormatError

Position = Literal["word", "phrase"]

WORD_GROUPS: tuple[str, ...] = (
    "NOUN", "VERB", "ADJ", "ADV", "PRON", "DET", "ADP", "NUM", "CONJ", "PRT", "PUNCT", "X",
)  # fmt: skip
PHRASE_GROUPS: tuple[str, ...] = (
    "S", "NP", "VP", "ADJP", "ADVP", "PP", "QP", "PRN", "CONJP", "FRAG", "BIN",
)  # fmt: skip

WORD_CATCH_ALL = "X"
PHRASE_CATCH_ALL = "FRAG"
BINARIZED_FALLBACK = "BIN"
"""Group for ``<tag>@`` intermediates whose base tag is unknown."""

N_WORD_GROUPS = len(WORD_GROUPS)
N_PHRASE_GROUPS = len(PHRASE_GROUPS)
N_TAG_CATEGORIES = N_WORD_GROUPS + N_PHRASE_GROUPS

_FUNCTION_TAG_RE = re.compile(r"[-=]")


@dataclass(frozen=True)
class ClusterMap:
    word_tag_to_group: Mapping[str, str]
    phrase_tag_to_group: Mapping[str, str]

    def group_name(self, cluster_id: int) -> str:
        if 0 <= cluster_id < N_WORD_GROUPS:
            return WORD_GROUPS[cluster_id]
        if N_WORD_GROUPS <= cluster_id < N_TAG_CATEGORIES:
            return PHRASE_GROUPS[cluster_id - N_WORD_GROUPS]
        raise ValueError(f"cluster id {cluster_id} outside [0, {N_TAG_CATEGORIES})")


def _lookup(table: Mapping[str, str], tag: str) -> str | None:
    if tag in table:
        return table[tag]
    # PTB function tags and coindexation: NP-SBJ, NP-TMP=2, S-1. Tags such as -NONE- start with
    # the separator and are looked up verbatim only.
    if tag and not tag.startswith("-"):
        base = _FUNCTION_TAG_RE.split(tag, maxsplit=1)[0]
        if base != tag:
            return table.get(base)
    return None


def cluster_tag(raw: str, position: Position, clusters: ClusterMap) -> int:
    """Map a raw tag to its cluster id. Total: unknown tags land in the catch-all group."""

    binarized = raw.endswith("@")
    base = raw.rstrip("@")

    if position == "word":
        group = _lookup(clusters.word_tag_to_group, base) or WORD_CATCH_ALL
        return WORD_GROUPS.index(group)

    group = _lookup(clusters.phrase_tag_to_group, base)
    if group is None:
        group = BINARIZED_FALLBACK if binarized else PHRASE_CATCH_ALL
    return N_WORD_GROUPS + PHRASE_GROUPS.index(group)


def parse_cluster_map(lines: Iterable[str], source: str = "<cluster map>") -> ClusterMap:
    sections: dict[str, dict[str, str]] = {"word": {}, "phrase": {}}
    allowed = {"word": set(WORD_GROUPS), "phrase": set(PHRASE_GROUPS)}
    current: str | None = None

    for number, raw_line in enumerate(lines, start=1):
        line = raw_line.rstrip("\r\n")
        # "#" is itself a PTB tag, so only "# ..." lines are comments.
        if not line.strip() or line == "#" or line.startswith("# "):
            continue
        header = line.strip()
        if header in ("[word]", "[phrase]"):
            current = header[1:-1]
            continue
        if current is None:
            raise DatasetFormatError(f"{source}: entry before a [word]/[phrase] header", number)
        fields = line.split("\t")
        if len(fields) != 2 or not fields[0] or not fields[1]:
            raise DatasetFormatError(f"{source}: expected RAWTAG<TAB>GROUP, got {line!r}", number)
        tag, group = fields[0], fields[1].strip()
        if group not in allowed[current]:
            raise DatasetFormatError(f"{source}: unknown {current} group {group!r}", number)
        sections[current][tag] = group

    return ClusterMap(sections["word"], sections["phrase"])


def load_cluster_map(path: Path | str | None = None) -> ClusterMap:
    """Load a cluster map file, or the packaged default when ``path`` is None."""

    if path is None:
        resource = importlib.resources.files("satatree.treebank").joinpath("tag_clusters.tsv")
        with resource.open("r", encoding="utf-8") as f:
            return parse_cluster_map(f, "tag_clusters.tsv")
    with open(path, encoding="utf-8") as f:
        return parse_cluster_map(f, str(path))


__all__ = [
    "BINARIZED_FALLBACK",
    "ClusterMap",
    "N_PHRASE_GROUPS",
    "N_TAG_CATEGORIES",
    "N_WORD_GROUPS",
    "PHRASE_CATCH_ALL",
    "PHRASE_GROUPS",
    "WORD_CATCH_ALL",
    "WORD_GROUPS",
    "Position",
    "cluster_tag",
    "load_cluster_map",
    "parse_cluster_map",
]
