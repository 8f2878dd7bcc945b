from satatree.training.checkpoint import (
    Checkpoint,
    dump_checkpoint,
    load_checkpoint,
    parse_checkpoint,
    save_checkpoint,
)
from satatree.training.optim import (
    AdadeltaState,
    AdamState,
    Optimizer,
    adadelta_step,
    adam_step,
    clip_grad_norm,
)
from satatree.training.train import (
    BEST_CHECKPOINT,
    CONFIG_FILE,
    LAST_CHECKPOINT,
    METRICS_FILE,
    EpochRecord,
    EvalReport,
    accuracy,
    build_model,
    build_vocab,
    cross_validate,
    evaluate,
    kfold_indices,
    train,
)

__all__ = [
    "BEST_CHECKPOINT",
    "CONFIG_FILE",
    "LAST_CHECKPOINT",
    "METRICS_FILE",
    "AdadeltaState",
    "AdamState",
    "Checkpoint",
    "EpochRecord",
    "EvalReport",
    "Optimizer",
    "accuracy",
    "adadelta_step",
    "adam_step",
    "build_model",
    "build_vocab",
    "clip_grad_norm",
    "cross_validate",
    "dump_checkpoint",
    "evaluate",
    "kfold_indices",
    "load_checkpoint",
    "parse_checkpoint",
    "save_checkpoint",
    "train",
]
