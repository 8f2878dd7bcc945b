"""
Shift-reduce linearization of binary trees.

A tree with n leaves becomes n SHIFTs and n - 1 REDUCEs in post-order, so transition i
corresponds to post-order node i. NOOPs only pad a finished program to a common batch length.
"""

from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from enum import Enum

from satatree.errors import TransitionError
from satatree.treebank.trees import BinaryTree


class Op(Enum):
    SHIFT = "shift"
    REDUCE = "reduce"
    NOOP = "noop"


@dataclass(frozen=True)
class Transition:
    op: Op
    index: int = -1
    """Token index consumed by a SHIFT."""
    cluster_id: int = -1
    tag: str = ""

    @classmethod
    def shift(cls, index: int, cluster_id: int, tag: str) -> Transition:
        return cls(Op.SHIFT, index, cluster_id, tag)

    @classmethod
    def reduce(cls, cluster_id: int, tag: str) -> Transition:
        return cls(Op.REDUCE, -1, cluster_id, tag)


NOOP = Transition(Op.NOOP)


@dataclass(frozen=True)
class TransitionSequence:
    ops: tuple[Transition, ...]

    def __len__(self) -> int:
        return len(self.ops)

    def __iter__(self) -> Iterator[Transition]:
        return iter(self.ops)

    def __getitem__(self, i: int) -> Transition:
        return self.ops[i]

    @property
    def n_shifts(self) -> int:
        return sum(1 for t in self.ops if t.op is Op.SHIFT)

    def validate(self) -> None:
        """Raise TransitionError unless the program builds exactly one tree."""

        depth = 0
        shifted = 0
        finished = False
        for step, t in enumerate(self.ops):
            if t.op is Op.NOOP:
                if depth != 1:
                    raise TransitionError(f"step {step}: padding before the tree is complete")
                finished = True
                continue
            if finished:
                raise TransitionError(f"step {step}: {t.op.value} after padding")
            if t.op is Op.SHIFT:
                if t.index != shifted:
                    raise TransitionError(
                        f"step {step}: SHIFT of token {t.index}, expected token {shifted}"
                    )
                shifted += 1
                depth += 1
            else:
                if depth < 2:
                    raise TransitionError(f"step {step}: REDUCE with stack depth {depth}")
                depth -= 1
        if depth != 1:
            raise TransitionError(f"program leaves {depth} items on the stack, expected 1")

    def padded(self, length: int) -> TransitionSequence:
        if length < len(self.ops):
            raise TransitionError(f"cannot pad {len(self.ops)} transitions down to {length}")
        return TransitionSequence(self.ops + (NOOP,) * (length - len(self.ops)))


def to_transitions(tree: BinaryTree) -> TransitionSequence:
    ops: list[Transition] = []
    position = 0
    for node in tree.postorder():
        if node.is_leaf:
            ops.append(Transition.shift(position, node.cluster_id, node.tag))
            position += 1
        else:
            ops.append(Transition.reduce(node.cluster_id, node.tag))
    return TransitionSequence(tuple(ops))


def from_transitions(sequence: TransitionSequence, tokens: Sequence[str]) -> BinaryTree:
    """Execute ``sequence`` on a stack, rebuilding the tree it linearizes."""

    sequence.validate()
    if sequence.n_shifts != len(tokens):
        raise TransitionError(f"{sequence.n_shifts} SHIFTs for {len(tokens)} tokens")

    stack: list[BinaryTree] = []
    for t in sequence:
        if t.op is Op.SHIFT:
            stack.append(BinaryTree(t.tag, t.cluster_id, token=tokens[t.index]))
        elif t.op is Op.REDUCE:
            right = stack.pop()
            left = stack.pop()
            stack.append(BinaryTree(t.tag, t.cluster_id, left, right))
    return stack[0]


__all__ = ["NOOP", "Op", "Transition", "TransitionSequence", "from_transitions", "to_transitions"]
