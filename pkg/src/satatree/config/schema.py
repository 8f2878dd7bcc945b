import hashlib
import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

LeafMode = Literal["lstm", "bilstm", "fc"]
TagMode = Literal["structure_aware", "naive", "none"]


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    d_w: int = Field(default=300, ge=1, description="Word embedding width.")
    d_h: int = Field(default=300, ge=1, description="Hidden width of the leaf-LSTM and word tree-LSTM.")
    d_T: int = Field(
        default=128,
        ge=1,
        description="Width of tag embeddings and tag tree-LSTM states. 128 puts the 300D SNLI "
        "model at about 3.3M trainable parameters.",
    )
    leaf_mode: LeafMode = Field(
        default="lstm",
        description="Leaf module: 'lstm' (sequential leaf-LSTM), 'bilstm' (projected to d_h) or "
        "'fc' (one tanh layer).",
    )
    tag_mode: TagMode = Field(
        default="structure_aware",
        description="Gate input: tag tree-LSTM states, raw tag embeddings ('naive'), or nothing.",
    )
    embedding_dropout: float = Field(default=0.0, ge=0, lt=1, description="Dropout on word embeddings.")
    forget_bias: float = Field(
        default=0.0,
        description="Initial forget-gate bias.",
    )
    dtype: Literal["float64", "float32"] = Field(
        default="float64",
        description="Parameter precision. Gradient checks require float64.",
    )
    fine_tune_words: bool = Field(default=True, description="Whether word embeddings are trained.")


class HeadConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    task: Literal["classify", "nli"] = Field(
        default="classify", description="Single-sentence classifier or siamese NLI matcher."
    )
    n_classes: int = Field(default=2, ge=2, description="Number of output classes (d_c).")
    d_s: int = Field(default=300, ge=1, description="Width of the ReLU layer before the softmax.")
    batch_norm: bool = Field(default=True, description="Batch-normalise the classifier input.")
    bn_momentum: float = Field(default=0.1, gt=0, le=1)
    bn_eps: float = Field(default=1e-5, gt=0)
    classifier_dropout: float = Field(default=0.0, ge=0, lt=1, description="Dropout on s.")


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    optimizer: Literal["adam", "adadelta"] = "adam"
    lr: float = Field(default=1e-3, ge=0, description="Learning rate (1.0 is usual for Adadelta).")
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0, description="Adam denominator epsilon.")
    rho: float = Field(default=0.95, ge=0, lt=1, description="Adadelta decay.")
    adadelta_eps: float = Field(default=1e-6, gt=0)
    weight_decay: float = Field(
        default=0.0, ge=0, description="Decoupled weight decay; biases and embeddings are exempt."
    )
    clip_norm: float = Field(default=5.0, gt=0, description="Global gradient-norm bound.")
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=10, ge=1)
    seed: int = 0
    selection: Literal["dev_accuracy", "train_loss"] = Field(
        default="dev_accuracy",
        description="Model-selection criterion. Without a dev set, train loss is used.",
    )
    phrase_supervision: bool = Field(
        default=False, description="Average node-level losses in when node labels exist."
    )
    workers: int = Field(default=1, ge=1, description="Data-parallel shards per batch.")


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train: str | None = None
    dev: str | None = None
    test: str | None = None
    embeddings: str | None = Field(default=None, description="Pretrained vectors (text format).")
    cluster_map: str | None = Field(default=None, description="Tag cluster file; packaged default if unset.")
    out_dir: str = Field(default="runs/default", description="Checkpoints and metrics go here.")
    min_count: int = Field(default=1, ge=1, description="Minimum training frequency for a vocab entry.")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    head: HeadConfig = Field(default_factory=HeadConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)

    def digest(self) -> str:
        """SHA-256 over the architecture (encoder and head); identical models share a digest."""

        canonical = json.dumps(
            {"encoder": self.encoder.model_dump(), "head": self.head.model_dump()},
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


__all__ = ["DataConfig", "EncoderConfig", "HeadConfig", "LeafMode", "RunConfig", "TagMode", "TrainConfig"]
