"""
Treebank handling: PTB S-expression parsing, binarization, tag clustering into 23 categories,
label merging, shift-reduce compilation and the dataset interchange format.
"""

from satatree.treebank.clusters import (
    N_TAG_CATEGORIES,
    ClusterMap,
    cluster_tag,
    load_cluster_map,
)
from satatree.treebank.dataset import (
    IGNORE_LABEL,
    Dataset,
    Example,
    load_dataset,
    write_dataset,
)
from satatree.treebank.sst import merge_sst_labels
from satatree.treebank.transitions import (
    Op,
    Transition,
    TransitionSequence,
    from_transitions,
    to_transitions,
)
from satatree.treebank.trees import (
    BinaryTree,
    ParseTree,
    binarize,
    parse_binary,
    parse_sexpr,
    to_binary,
)

__all__ = [
    "BinaryTree",
    "ClusterMap",
    "Dataset",
    "Example",
    "IGNORE_LABEL",
    "N_TAG_CATEGORIES",
    "Op",
    "ParseTree",
    "Transition",
    "TransitionSequence",
    "binarize",
    "cluster_tag",
    "from_transitions",
    "load_cluster_map",
    "load_dataset",
    "merge_sst_labels",
    "parse_binary",
    "parse_sexpr",
    "to_binary",
    "to_transitions",
    "write_dataset",
]
