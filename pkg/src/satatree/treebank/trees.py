"""
Constituency trees: PTB-style S-expression parsing, binarization, and the clustered binary form
consumed by the encoders.
"""

from __future__ import annotations

import re
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from typing import Any

from satatree.errors import TreeParseError
from satatree.treebank.clusters import ClusterMap, cluster_tag

_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")

_UNESCAPE = {"-LRB-": "(", "-RRB-": ")", "-LSB-": "[", "-RSB-": "]", "-LCB-": "{", "-RCB-": "}"}
_ESCAPE = {"(": "-LRB-", ")": "-RRB-"}

# Wrapper labels that carry no syntactic category; unary collapse looks through them.
_TRANSPARENT_TAGS = frozenset({"ROOT", "TOP", "VROOT"})


@dataclass
class ParseTree:
    tag: str
    children: list[ParseTree] = field(default_factory=list)
    token: str | None = None

    def __post_init__(self) -> None:
        if not self.tag:
            raise ValueError("every tree node needs a nonempty tag")
        if (self.token is None) == (not self.children):
            raise ValueError(f"node {self.tag!r} must have either a token or children, not both")

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> list[ParseTree]:
        out: list[ParseTree] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend(reversed(node.children))
        return out

    def tokens(self) -> list[str]:
        return [leaf.token for leaf in self.leaves() if leaf.token is not None]

    def to_sexpr(self) -> str:
        return _render(self, lambda node: node.children)


@dataclass
class BinaryTree:
    """A binarized, tag-clustered tree. Leaves carry a token; internal nodes two children."""

    tag: str
    cluster_id: int
    left: BinaryTree | None = None
    right: BinaryTree | None = None
    token: str | None = None

    def __post_init__(self) -> None:
        if self.token is None and (self.left is None or self.right is None):
            raise ValueError(f"internal node {self.tag!r} needs exactly two children")
        if self.token is not None and (self.left is not None or self.right is not None):
            raise ValueError(f"leaf {self.tag!r} cannot have children")

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def postorder(self) -> list[BinaryTree]:
        out: list[BinaryTree] = []
        stack: list[tuple[BinaryTree, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if node.is_leaf or expanded:
                out.append(node)
                continue
            assert node.left is not None and node.right is not None
            stack.append((node, True))
            stack.append((node.right, False))
            stack.append((node.left, False))
        return out

    def leaves(self) -> list[BinaryTree]:
        return [n for n in self.postorder() if n.is_leaf]

    def tokens(self) -> list[str]:
        return [n.token for n in self.leaves() if n.token is not None]

    @property
    def n_leaves(self) -> int:
        return len(self.leaves())

    def spans(self) -> list[tuple[int, int]]:
        """Half-open leaf span of every node, in post-order."""

        spans: list[tuple[int, int]] = []
        pending: list[tuple[int, int]] = []
        position = 0
        for node in self.postorder():
            if node.is_leaf:
                span = (position, position + 1)
                position += 1
            else:
                right = pending.pop()
                left = pending.pop()
                span = (left[0], right[1])
            pending.append(span)
            spans.append(span)
        return spans

    def to_sexpr(self) -> str:
        return _render(self, lambda node: [node.left, node.right])


def _render(root: ParseTree | BinaryTree, children_of: Callable[[Any], list[Any]]) -> str:
    parts: list[str] = []
    stack: list[Any] = [root]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif item.token is not None:
            parts.append(f"({item.tag} {_ESCAPE.get(item.token, item.token)})")
        else:
            parts.append(f"({item.tag}")
            stack.append(")")
            for child in reversed(children_of(item)):
                stack.append(child)
                stack.append(" ")
    return "".join(parts)


def _tokenize(text: str) -> Iterator[tuple[str, int]]:
    for match in _TOKEN_RE.finditer(text):
        yield match.group(), match.start()


def parse_sexpr(text: str) -> ParseTree:
    """Parse one bracketed tree such as ``(NP (DT the) (NN stories))``.

    Whitespace is insignificant. PTB bracket escapes in tokens (-LRB-, -RRB-, ...) are unescaped.
    A node with an empty label that wraps a single subtree, as in ``( (S ...))``, is dropped.
    Errors report the byte offset where parsing failed.
    """

    def fail(message: str, char_offset: int) -> TreeParseError:
        return TreeParseError(message, len(text[:char_offset].encode("utf-8")))

    tokens = list(_tokenize(text))
    if not tokens:
        raise fail("empty input", 0)

    # Each open frame: (tag, children, offset of its opening paren)
    stack: list[tuple[str, list[ParseTree], int]] = []
    root: ParseTree | None = None
    i = 0
    while i < len(tokens):
        tok, offset = tokens[i]
        if tok == "(":
            if root is not None:
                raise fail("unexpected content after the end of the tree", offset)
            if i + 1 >= len(tokens):
                raise fail("unbalanced parentheses: unexpected end of input", len(text))
            nxt, nxt_offset = tokens[i + 1]
            if nxt == ")":
                raise fail("empty node", offset)
            if nxt == "(":
                stack.append(("", [], offset))
                i += 1
                continue
            stack.append((nxt, [], offset))
            i += 2
            continue

        if tok == ")":
            if not stack:
                raise fail("unbalanced parentheses: unexpected ')'", offset)
            tag, children, open_offset = stack.pop()
            if not children:
                raise fail(f"node {tag!r} has no children", open_offset)
            if not tag:
                if len(children) != 1:
                    raise fail("node without a tag", open_offset)
                node = children[0]
            else:
                node = ParseTree(tag, children)
            if stack:
                stack[-1][1].append(node)
            else:
                root = node
            i += 1
            continue

        # A bare token: it must be the only content of its node.
        if not stack:
            raise fail(f"token {tok!r} outside of any node", offset)
        tag, children, open_offset = stack[-1]
        if children:
            raise fail(f"token {tok!r} mixed with subtrees in node {tag!r}", offset)
        if not tag:
            raise fail("leaf without a tag", open_offset)
        if i + 1 >= len(tokens):
            raise fail("unbalanced parentheses: unexpected end of input", len(text))
        closing, closing_offset = tokens[i + 1]
        if closing != ")":
            raise fail(f"leaf {tag!r} cannot have children", closing_offset)
        stack.pop()
        leaf = ParseTree(tag, token=_UNESCAPE.get(tok, tok))
        if stack:
            stack[-1][1].append(leaf)
        else:
            root = leaf
        i += 2

    if stack or root is None:
        raise fail("unbalanced parentheses: unexpected end of input", len(text))
    return root


def _collapse_unary(tree: ParseTree) -> tuple[str, ParseTree]:
    tag = tree.tag
    node = tree
    while not node.is_leaf and len(node.children) == 1:
        node = node.children[0]
        if tag in _TRANSPARENT_TAGS:
            tag = node.tag
    return tag, node


def binarize(tree: ParseTree) -> ParseTree:
    """Left-binarize ``tree`` and collapse unary chains.

    A node with k > 2 children becomes a left-branching chain whose intermediate nodes are tagged
    ``<tag>@``. A unary chain collapses to its lowest branching node but keeps the topmost tag
    (ROOT/TOP wrappers excepted). A chain ending in a preterminal collapses to that leaf, so leaves
    keep their word-level tags.
    """

    done: list[ParseTree] = []
    stack: list[tuple[ParseTree, bool]] = [(tree, False)]
    while stack:
        node, expanded = stack.pop()
        tag, bottom = _collapse_unary(node)
        if bottom.is_leaf:
            done.append(ParseTree(bottom.tag, token=bottom.token))
            continue
        if not expanded:
            stack.append((node, True))
            stack.extend((child, False) for child in reversed(bottom.children))
            continue
        kids = done[-len(bottom.children) :]
        del done[-len(bottom.children) :]
        intermediate = tag.rstrip("@") + "@"
        acc = kids[0]
        for kid in kids[1:-1]:
            acc = ParseTree(intermediate, [acc, kid])
        done.append(ParseTree(tag, [acc, kids[-1]]))
    return done[0]


def to_binary(tree: ParseTree, clusters: ClusterMap) -> BinaryTree:
    """Attach cluster ids to an already binarized tree."""

    done: list[BinaryTree] = []
    stack: list[tuple[ParseTree, bool]] = [(tree, False)]
    while stack:
        node, expanded = stack.pop()
        if node.is_leaf:
            done.append(BinaryTree(node.tag, cluster_tag(node.tag, "word", clusters), token=node.token))
            continue
        if not expanded:
            if len(node.children) != 2:
                raise ValueError(
                    f"node {node.tag!r} has {len(node.children)} children; binarize the tree first"
                )
            stack.append((node, True))
            stack.append((node.children[1], False))
            stack.append((node.children[0], False))
            continue
        right = done.pop()
        left = done.pop()
        done.append(BinaryTree(node.tag, cluster_tag(node.tag, "phrase", clusters), left, right))
    return done[0]


def parse_binary(text: str, clusters: ClusterMap) -> BinaryTree:
    """Parse, binarize and cluster one tree."""

    return to_binary(binarize(parse_sexpr(text)), clusters)


__all__ = ["BinaryTree", "ParseTree", "binarize", "parse_binary", "parse_sexpr", "to_binary"]
