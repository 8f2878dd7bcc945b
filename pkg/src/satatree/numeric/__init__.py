"""
Minimal numeric core: dense tensors with tape-based reverse-mode differentiation, initializers,
a finite-difference gradient checker and PCA. Everything else in satatree builds on it.
"""

from satatree.errors import GradientError
from satatree.numeric.gradcheck import (
    GradCheckResult,
    analytic_gradients,
    check_gradients,
    grad_check,
)
from satatree.numeric.init import he_init, uniform_init
from satatree.numeric.pca import PrincipalAxes, pca_decompose, pca_project
from satatree.numeric.tensor import (
    Parameter,
    RowGrad,
    Tape,
    TapeNode,
    Tensor,
    abs_,
    accumulate,
    add,
    as_tensor,
    batch_norm,
    concat,
    dropout,
    hadamard,
    log_softmax,
    matmul,
    mean,
    pick,
    relu,
    scale,
    sigmoid,
    slice_,
    softmax,
    split,
    stack,
    sub,
    sum_,
    take_rows,
    tanh_,
    transpose,
)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(parameter) into every reachable trainable Parameter."""

    if loss.node is None:
        raise GradientError("loss was not recorded on any tape")
    loss.node.owner.backward(loss)


__all__ = [
    "GradCheckResult",
    "Parameter",
    "PrincipalAxes",
    "RowGrad",
    "Tape",
    "TapeNode",
    "Tensor",
    "abs_",
    "accumulate",
    "add",
    "analytic_gradients",
    "as_tensor",
    "backward",
    "batch_norm",
    "check_gradients",
    "concat",
    "dropout",
    "grad_check",
    "hadamard",
    "he_init",
    "log_softmax",
    "matmul",
    "mean",
    "pca_decompose",
    "pca_project",
    "pick",
    "relu",
    "scale",
    "sigmoid",
    "slice_",
    "softmax",
    "split",
    "stack",
    "sub",
    "sum_",
    "take_rows",
    "tanh_",
    "transpose",
    "uniform_init",
]
