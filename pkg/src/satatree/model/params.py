"""
The parameter table. ``param_shapes`` is the one place that decides which tensors a configuration
owns and in which order; construction, counting and checkpoints all iterate it.
"""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from satatree.config import RunConfig
from satatree.errors import CheckpointError, DimensionError
from satatree.embeddings import init_tag_matrix, init_word_matrix
from satatree.numeric import Parameter, he_init
from satatree.treebank.clusters import N_TAG_CATEGORIES

Shape = tuple[int, ...]


def head_input_width(config: RunConfig) -> int:
    return 4 * config.encoder.d_h if config.head.task == "nli" else config.encoder.d_h


def param_shapes(config: RunConfig, vocab_size: int = 0, include_head: bool = True) -> dict[str, Shape]:
    """Ordered ``{name: shape}`` for every tensor of the model.

    ``embed.words`` is listed only when ``vocab_size`` is positive.
    """

    enc = config.encoder
    d_w, d_h, d_T = enc.d_w, enc.d_h, enc.d_T
    shapes: dict[str, Shape] = {}

    if vocab_size > 0:
        shapes["embed.words"] = (vocab_size, d_w)
    if enc.tag_mode != "none":
        shapes["embed.tags"] = (N_TAG_CATEGORIES, d_T)
    if enc.tag_mode == "structure_aware":
        shapes["tag.U_T"] = (2 * d_T, d_T)
        shapes["tag.a_T"] = (2 * d_T,)
        shapes["tag.W_T"] = (5 * d_T, 3 * d_T)
        shapes["tag.b_T"] = (5 * d_T,)

    match enc.leaf_mode:
        case "lstm":
            shapes["leaf.W_L"] = (4 * d_h, d_h + d_w)
            shapes["leaf.b_L"] = (4 * d_h,)
        case "bilstm":
            for direction in ("fwd", "bwd"):
                shapes[f"leaf.{direction}.W_L"] = (4 * d_h, d_h + d_w)
                shapes[f"leaf.{direction}.b_L"] = (4 * d_h,)
            shapes["leaf.proj.W_p"] = (d_h, 2 * d_h)
            shapes["leaf.proj.b_p"] = (d_h,)
        case "fc":
            shapes["leaf.W_fc"] = (2 * d_h, d_w)
            shapes["leaf.b_fc"] = (2 * d_h,)

    gate_width = 2 * d_h if enc.tag_mode == "none" else 2 * d_h + d_T
    shapes["word.U_w"] = (d_h, 2 * d_h)
    shapes["word.a_w"] = (d_h,)
    shapes["word.W_w"] = (4 * d_h, gate_width)
    shapes["word.b_w"] = (4 * d_h,)

    if include_head:
        head, d_in = config.head, head_input_width(config)
        shapes["head.W_s"] = (head.d_s, d_in)
        shapes["head.b_s"] = (head.d_s,)
        shapes["head.W_c"] = (head.n_classes, head.d_s)
        shapes["head.b_c"] = (head.n_classes,)
        if head.batch_norm:
            shapes["head.bn.gamma"] = (d_in,)
            shapes["head.bn.beta"] = (d_in,)
    return shapes


def buffer_shapes(config: RunConfig) -> dict[str, Shape]:
    if not config.head.batch_norm:
        return {}
    d_in = head_input_width(config)
    return {"head.bn.running_mean": (d_in,), "head.bn.running_var": (d_in,)}


def is_trainable(name: str, config: RunConfig) -> bool:
    return name != "embed.words" or config.encoder.fine_tune_words


def is_decayed(name: str) -> bool:
    """Weight decay touches weight matrices only: never biases, embeddings or norm scales."""

    leaf = name.rsplit(".", 1)[-1]
    return not (name.startswith("embed.") or ".bn." in name or leaf.startswith(("a_", "b_")))


def itemize_params(config: RunConfig, vocab_size: int = 0, include_head: bool = True) -> dict[str, int]:
    """Trainable scalar count per tensor; frozen word vectors are left out."""

    return {
        name: int(np.prod(shape))
        for name, shape in param_shapes(config, vocab_size, include_head).items()
        if is_trainable(name, config)
    }


def count_params(config: RunConfig, vocab_size: int = 0, include_head: bool = True) -> int:
    return sum(itemize_params(config, vocab_size, include_head).values())


# bias name -> (blocks in the fused bias, first forget block, forget block count)
_FORGET_BLOCKS = {"b_L": (4, 1, 1), "b_w": (4, 1, 2), "b_T": (5, 1, 2)}


def init_value(
    name: str,
    shape: Shape,
    config: RunConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    dtype = np.dtype(config.encoder.dtype)
    leaf = name.rsplit(".", 1)[-1]

    if name == "embed.tags":
        return init_tag_matrix(shape[1], rng, dtype)
    if name == "embed.words":
        return init_word_matrix(shape[0], shape[1], rng, dtype)
    if name == "head.bn.gamma":
        return np.ones(shape, dtype=dtype)
    if len(shape) == 2:
        return he_init(shape, shape[1], rng, dtype)

    value = np.zeros(shape, dtype=dtype)
    if leaf in _FORGET_BLOCKS and config.encoder.forget_bias:
        n_blocks, first, count = _FORGET_BLOCKS[leaf]
        width = shape[0] // n_blocks
        value[first * width : (first + count) * width] = config.encoder.forget_bias
    return value


class SataParams:
    """Named Parameters plus non-trainable buffers (batch-norm running statistics)."""

    def __init__(self, params: dict[str, Parameter], buffers: dict[str, np.ndarray]) -> None:
        self.params = params
        self.buffers = buffers

    @classmethod
    def initialize(
        cls,
        config: RunConfig,
        vocab_size: int,
        rng: np.random.Generator,
        word_vectors: np.ndarray | None = None,
    ) -> SataParams:
        """He-normal weight matrices, zero biases, small-uniform embeddings.

        ``word_vectors`` replaces the random word matrix (pretrained rows plus their OOV fill).
        """

        params: dict[str, Parameter] = {}
        for name, shape in param_shapes(config, vocab_size).items():
            if name == "embed.words" and word_vectors is not None:
                if word_vectors.shape != shape:
                    raise DimensionError(f"word vectors have shape {word_vectors.shape}, expected {shape}")
                value = word_vectors.astype(config.encoder.dtype)
            else:
                value = init_value(name, shape, config, rng)
            params[name] = Parameter(
                name, value, trainable=is_trainable(name, config), decay=is_decayed(name)
            )

        dtype = np.dtype(config.encoder.dtype)
        buffers = {
            name: (np.ones(shape, dtype=dtype) if name.endswith("running_var") else np.zeros(shape, dtype=dtype))
            for name, shape in buffer_shapes(config).items()
        }
        return cls(params, buffers)

    def __getitem__(self, name: str) -> Parameter:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[Parameter]:
        return iter(self.params.values())

    def trainable(self) -> list[Parameter]:
        return [p for p in self.params.values() if p.trainable]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"param/{name}": p.value for name, p in self.params.items()}
        out.update({f"buffer/{name}": value for name, value in self.buffers.items()})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            value = arrays.get(f"param/{name}")
            if value is None:
                raise CheckpointError(f"missing tensor param/{name}")
            if value.shape != p.shape:
                raise CheckpointError(f"param/{name} has shape {value.shape}, expected {p.shape}")
            p.value[...] = value
        for name, buffer in self.buffers.items():
            value = arrays.get(f"buffer/{name}")
            if value is None:
                raise CheckpointError(f"missing tensor buffer/{name}")
            buffer[...] = value


__all__ = [
    "SataParams",
    "buffer_shapes",
    "count_params",
    "head_input_width",
    "init_value",
    "is_decayed",
    "is_trainable",
    "itemize_params",
    "param_shapes",
]
