"""
Finite-difference gradient checking.

The analytic gradient comes from one backward pass; the numeric one from central differences,
perturbing each parameter coordinate in place. Errors are compared with the scale-aware metric
|analytic - numeric| / max(1, |analytic| + |numeric|).
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from satatree.errors import NonFiniteError
from satatree.numeric.tensor import Parameter, RowGrad, Tape, Tensor

logger = logging.getLogger(__name__)

Objective = Callable[[], Tensor]


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_err: float
    worst_parameter: str | None
    worst_index: tuple[int, ...] | None
    coordinates: int


def analytic_gradients(f: Objective, params: Sequence[Parameter]) -> dict[str, np.ndarray]:
    """Dense gradients of ``f()`` with respect to ``params`` (zeros where unreachable)."""

    with Tape() as tape:
        loss = f()
    grads = tape.gradients(loss)
    out: dict[str, np.ndarray] = {}
    for p in params:
        g = grads.get(p)
        if g is None:
            out[p.name] = np.zeros_like(p.value)
        elif isinstance(g, RowGrad):
            out[p.name] = g.dense(p.shape, p.value.dtype)
        else:
            out[p.name] = np.array(g)
    return out


def _evaluate(f: Objective, param: Parameter, index: tuple[int, ...]) -> float:
    try:
        value = float(np.asarray(f().data).reshape(-1)[0])
    except NonFiniteError as e:
        raise NonFiniteError(
            f"non-finite intermediate while perturbing {param.name}{list(index)}: {e}",
            e.op,
            index,
        ) from e
    if not np.isfinite(value):
        raise NonFiniteError(f"non-finite objective at {param.name}{list(index)}", None, index)
    return value


def check_gradients(
    f: Objective,
    params: Sequence[Parameter],
    eps: float = 1e-5,
    analytic: Mapping[str, np.ndarray] | None = None,
) -> GradCheckResult:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    if analytic is None:
        analytic = analytic_gradients(f, params)

    worst = 0.0
    worst_name: str | None = None
    worst_index: tuple[int, ...] | None = None
    count = 0

    for param in params:
        grad = analytic[param.name]
        for index in np.ndindex(*param.shape):
            original = param.value[index]
            param.value[index] = original + eps
            plus = _evaluate(f, param, index)
            param.value[index] = original - eps
            minus = _evaluate(f, param, index)
            param.value[index] = original

            numeric = (plus - minus) / (2.0 * eps)
            a = float(grad[index])
            err = abs(a - numeric) / max(1.0, abs(a) + abs(numeric))
            count += 1
            if err > worst:
                worst, worst_name, worst_index = err, param.name, index

    logger.debug("gradient check over %d coordinates: max rel err %.3e", count, worst)
    return GradCheckResult(worst, worst_name, worst_index, count)


def grad_check(
    f: Objective,
    params: Sequence[Parameter],
    eps: float = 1e-5,
    analytic: Mapping[str, np.ndarray] | None = None,
) -> float:
    """Return the maximum relative error between analytic and central-difference gradients."""

    return check_gradients(f, params, eps, analytic).max_rel_err


__all__ = ["GradCheckResult", "analytic_gradients", "check_gradients", "grad_check"]
