"""
Adam and Adadelta over ``Parameter.grad``, decoupled weight decay, and global-norm clipping.

A step whose gradients contain NaN or Inf is skipped entirely (no moment update, no decay) and
reported through the logger.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from satatree.config import TrainConfig
from satatree.errors import CheckpointError
from satatree.numeric import Parameter

logger = logging.getLogger(__name__)


def clip_grad_norm(grads: Iterable[np.ndarray], max_norm: float = 5.0) -> float:
    """Scale ``grads`` in place so their global L2 norm is at most ``max_norm``; return the norm before."""

    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    grads = list(grads)
    norm = float(np.sqrt(sum(float(np.vdot(g, g)) for g in grads)))
    if norm > max_norm:
        factor = max_norm / norm
        for g in grads:
            g *= factor
    return norm


def _all_finite(params: Sequence[Parameter]) -> bool:
    return all(np.isfinite(p.grad).all() for p in params)


def _decay(params: Sequence[Parameter], lr: float, weight_decay: float) -> None:
    if weight_decay <= 0.0:
        return
    for p in params:
        if p.decay:
            p.value -= lr * weight_decay * p.value


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


@dataclass
class AdadeltaState:
    sq_grad: dict[str, np.ndarray] = field(default_factory=dict)
    sq_update: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Parameter], state: AdamState, config: TrainConfig) -> bool:
    """One bias-corrected Adam update from each parameter's ``grad``. Returns False if skipped."""

    if not _all_finite(params):
        logger.warning("non-finite gradient, skipping Adam step %d", state.t + 1)
        return False
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p in params:
        m = state.m.setdefault(p.name, np.zeros_like(p.value))
        v = state.v.setdefault(p.name, np.zeros_like(p.value))
        m *= b1
        m += (1.0 - b1) * p.grad
        v *= b2
        v += (1.0 - b2) * p.grad * p.grad
        m_hat = m / correction1
        v_hat = v / correction2
        p.value -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
    _decay(params, config.lr, config.weight_decay)
    return True


def adadelta_step(params: Sequence[Parameter], state: AdadeltaState, config: TrainConfig) -> bool:
    if not _all_finite(params):
        logger.warning("non-finite gradient, skipping Adadelta step")
        return False
    rho, eps = config.rho, config.adadelta_eps
    for p in params:
        eg2 = state.sq_grad.setdefault(p.name, np.zeros_like(p.value))
        edx2 = state.sq_update.setdefault(p.name, np.zeros_like(p.value))
        eg2 *= rho
        eg2 += (1.0 - rho) * p.grad * p.grad
        dx = -np.sqrt(edx2 + eps) / np.sqrt(eg2 + eps) * p.grad
        edx2 *= rho
        edx2 += (1.0 - rho) * dx * dx
        p.value += config.lr * dx
    _decay(params, config.lr, config.weight_decay)
    return True


class Optimizer:
    """Binds one of the two update rules to a parameter list and a TrainConfig."""

    def __init__(self, params: Sequence[Parameter], config: TrainConfig) -> None:
        self.params = [p for p in params if p.trainable]
        self.config = config
        self.state: AdamState | AdadeltaState = AdamState() if config.optimizer == "adam" else AdadeltaState()
        self.skipped = 0

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def clip(self) -> float:
        return clip_grad_norm((p.grad for p in self.params), self.config.clip_norm)

    def step(self) -> bool:
        if isinstance(self.state, AdamState):
            applied = adam_step(self.params, self.state, self.config)
        else:
            applied = adadelta_step(self.params, self.state, self.config)
        if not applied:
            self.skipped += 1
        return applied

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Flat named arrays for the checkpoint; the Adam step count rides along as a 0-d array."""

        out: dict[str, np.ndarray] = {}
        if isinstance(self.state, AdamState):
            out["optim/t"] = np.asarray(float(self.state.t))
            out.update({f"optim/m/{k}": v for k, v in self.state.m.items()})
            out.update({f"optim/v/{k}": v for k, v in self.state.v.items()})
        else:
            out.update({f"optim/sq_grad/{k}": v for k, v in self.state.sq_grad.items()})
            out.update({f"optim/sq_update/{k}": v for k, v in self.state.sq_update.items()})
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        known = {p.name for p in self.params}
        slots: dict[str, dict[str, np.ndarray]]
        if isinstance(self.state, AdamState):
            self.state.t = int(arrays.get("optim/t", np.asarray(0.0)))
            slots = {"m": self.state.m, "v": self.state.v}
        else:
            slots = {"sq_grad": self.state.sq_grad, "sq_update": self.state.sq_update}
        for key, value in arrays.items():
            parts = key.split("/", 2)
            if len(parts) != 3 or parts[0] != "optim":
                continue
            _, slot, name = parts
            if slot not in slots:
                raise CheckpointError(f"optimizer slot {slot!r} does not belong to {self.config.optimizer}")
            if name not in known:
                raise CheckpointError(f"optimizer state for unknown parameter {name!r}")
            slots[slot][name] = value.copy()


__all__ = [
    "AdadeltaState",
    "AdamState",
    "Optimizer",
    "adadelta_step",
    "adam_step",
    "clip_grad_norm",
]
