"""
The SATA Tree-LSTM: recurrence cells, the encoder that wires them over a parse, the task heads, and
``SataModel`` which ties them to a vocabulary and a parameter table.
"""

from satatree.model.cells import (
    CellState,
    FcLeafParams,
    LeafLstmParams,
    PlainTreeCellParams,
    TagTreeCellParams,
    WordTreeCellParams,
    fc_leaf_step,
    leaf_lstm_step,
    sata_candidate,
    sata_compose,
    tag_internal_step,
    tag_leaf_step,
    tree_lstm_step,
)
from satatree.model.encoder import (
    EncoderView,
    Encoding,
    NodeAnnotation,
    encode_sentence,
    encode_tags,
    spinn_encode,
    spinn_encode_batch,
)
from satatree.model.heads import (
    BatchStats,
    ClassifierParams,
    classifier_logits,
    classify,
    cross_entropy,
    snli_features,
    update_running_stats,
)
from satatree.model.params import SataParams, count_params, itemize_params, param_shapes
from satatree.model.sata import ForwardResult, SataModel

__all__ = [
    "BatchStats",
    "CellState",
    "ClassifierParams",
    "EncoderView",
    "Encoding",
    "FcLeafParams",
    "ForwardResult",
    "LeafLstmParams",
    "NodeAnnotation",
    "PlainTreeCellParams",
    "SataModel",
    "SataParams",
    "TagTreeCellParams",
    "WordTreeCellParams",
    "classifier_logits",
    "classify",
    "count_params",
    "cross_entropy",
    "encode_sentence",
    "encode_tags",
    "fc_leaf_step",
    "itemize_params",
    "leaf_lstm_step",
    "param_shapes",
    "sata_candidate",
    "sata_compose",
    "snli_features",
    "spinn_encode",
    "spinn_encode_batch",
    "tag_internal_step",
    "tag_leaf_step",
    "tree_lstm_step",
    "update_running_stats",
]
