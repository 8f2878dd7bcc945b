"""Tests for satatree.training.optim."""

import numpy as np
import pytest

from satatree.config import TrainConfig
from satatree.errors import CheckpointError
from satatree.numeric import Parameter
from satatree.training import AdadeltaState, AdamState, Optimizer, adadelta_step, adam_step, clip_grad_norm


def _param(value, grad, decay: bool = True) -> Parameter:
    p = Parameter("w", np.asarray(value, dtype=float), decay=decay)
    p.grad[...] = grad
    return p


def test_clip_scales_to_max_norm():
    grads = [np.array([3.0, 4.0])]
    assert clip_grad_norm(grads, 1.0) == pytest.approx(5.0)
    np.testing.assert_allclose(grads[0], [0.6, 0.8])


def test_clip_leaves_small_gradients_alone():
    grads = [np.array([0.3]), np.array([0.4])]
    assert clip_grad_norm(grads, 5.0) == pytest.approx(0.5)
    assert grads[0][0] == 0.3


def test_clip_norm_must_be_positive():
    with pytest.raises(ValueError, match="max_norm"):
        clip_grad_norm([np.ones(1)], 0.0)


def test_first_adam_step_moves_by_lr():
    p = _param([1.0, -1.0], [0.5, -2.0])
    assert adam_step([p], AdamState(), TrainConfig(lr=0.1))
    np.testing.assert_allclose(p.value, [0.9, -0.9], rtol=1e-6)


def test_adam_skips_non_finite_gradients(caplog):
    p = _param([1.0], [np.nan])
    state = AdamState()
    assert not adam_step([p], state, TrainConfig())
    assert p.value[0] == 1.0
    assert state.t == 0
    assert "skipping" in caplog.text


def test_adadelta_first_step():
    p = _param([1.0], [2.0])
    config = TrainConfig(optimizer="adadelta", lr=1.0, rho=0.95, adadelta_eps=1e-6)
    assert adadelta_step([p], AdadeltaState(), config)
    eg2 = 0.05 * 4.0
    expected = 1.0 - np.sqrt(1e-6) / np.sqrt(eg2 + 1e-6) * 2.0
    assert p.value[0] == pytest.approx(expected)


def test_weight_decay_is_decoupled_and_skips_exempt_parameters():
    config = TrainConfig(optimizer="adadelta", lr=1.0, weight_decay=0.1)
    decayed = _param([1.0], [0.0])
    exempt = _param([1.0], [0.0], decay=False)
    adadelta_step([decayed, exempt], AdadeltaState(), config)
    assert decayed.value[0] == pytest.approx(0.9)
    assert exempt.value[0] == 1.0


def test_optimizer_ignores_frozen_parameters():
    frozen = Parameter("frozen", np.ones(2), trainable=False)
    live = _param([1.0], [1.0])
    opt = Optimizer([frozen, live], TrainConfig())
    assert opt.params == [live]
    opt.step()
    assert frozen.value.tolist() == [1.0, 1.0]


def test_optimizer_counts_skipped_steps():
    opt = Optimizer([_param([1.0], [np.inf])], TrainConfig())
    assert not opt.step()
    assert opt.skipped == 1


def test_optimizer_state_round_trip():
    p = _param([1.0, 2.0], [0.1, 0.2])
    opt = Optimizer([p], TrainConfig())
    opt.step()
    opt.step()
    arrays = opt.state_arrays()
    assert set(arrays) == {"optim/t", "optim/m/w", "optim/v/w"}

    restored = Optimizer([p], TrainConfig())
    restored.load_state_arrays(arrays)
    assert isinstance(restored.state, AdamState)
    assert restored.state.t == 2
    np.testing.assert_array_equal(restored.state.m["w"], arrays["optim/m/w"])


def test_optimizer_state_for_wrong_rule_is_rejected():
    opt = Optimizer([_param([1.0], [0.0])], TrainConfig(optimizer="adadelta"))
    with pytest.raises(CheckpointError, match="does not belong to adadelta"):
        opt.load_state_arrays({"optim/m/w": np.zeros(1)})
    with pytest.raises(CheckpointError, match="unknown parameter"):
        opt.load_state_arrays({"optim/sq_grad/other": np.zeros(1)})


def _step(rule: str, params, state, config) -> bool:
    return adam_step(params, state, config) if rule == "adam" else adadelta_step(params, state, config)


def _state(rule: str):
    return AdamState() if rule == "adam" else AdadeltaState()


@pytest.mark.parametrize("rule", ["adam", "adadelta"])
def test_zero_gradient_leaves_parameters_alone(rule):
    p = _param([1.5, -2.0, 0.25], 0.0)
    state = _state(rule)
    config = TrainConfig(optimizer=rule, lr=1.0, weight_decay=0.0)
    for _ in range(5):
        assert _step(rule, [p], state, config)
    np.testing.assert_array_equal(p.value, [1.5, -2.0, 0.25])


@pytest.mark.parametrize("rule", ["adam", "adadelta"])
def test_zero_learning_rate_leaves_parameters_alone(rule):
    p = _param([1.5, -2.0], [0.3, -4.0])
    state = _state(rule)
    config = TrainConfig(optimizer=rule, lr=0.0, weight_decay=0.0)
    for _ in range(5):
        assert _step(rule, [p], state, config)
    np.testing.assert_array_equal(p.value, [1.5, -2.0])


def test_adadelta_gradient_average_approaches_squared_gradient():
    p = _param([0.0], [2.0])
    state = AdadeltaState()
    config = TrainConfig(optimizer="adadelta", lr=1.0, rho=0.9, weight_decay=0.0)
    gaps = []
    for _ in range(50):
        before = p.value.copy()
        assert adadelta_step([p], state, config)
        assert p.value[0] < before[0]
        gaps.append(4.0 - state.sq_grad["w"][0])
    assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))
    assert gaps[-1] == pytest.approx(4.0 * 0.9**50)


def test_adadelta_without_memory_uses_the_latest_gradient_only():
    p = _param([0.0], [2.0])
    state = AdadeltaState()
    config = TrainConfig(optimizer="adadelta", lr=1.0, rho=0.0, adadelta_eps=1e-6, weight_decay=0.0)
    assert adadelta_step([p], state, config)
    first = -np.sqrt(1e-6) / np.sqrt(4.0 + 1e-6) * 2.0
    assert p.value[0] == pytest.approx(first)
    assert state.sq_grad["w"][0] == 4.0
    assert state.sq_update["w"][0] == pytest.approx(first**2)

    p.grad[...] = -3.0
    assert adadelta_step([p], state, config)
    second = np.sqrt(first**2 + 1e-6) / np.sqrt(9.0 + 1e-6) * 3.0
    assert state.sq_grad["w"][0] == 9.0
    assert p.value[0] == pytest.approx(first + second)


def test_clip_boundary_cases():
    at_limit = [np.array([3.0, 4.0])]
    assert clip_grad_norm(at_limit, 5.0) == 5.0
    np.testing.assert_array_equal(at_limit[0], [3.0, 4.0])

    over = [np.array([6.0, 8.0])]
    assert clip_grad_norm(over, 5.0) == 10.0
    np.testing.assert_array_equal(over[0], [3.0, 4.0])


def test_adam_trajectory_is_reproducible():
    def run() -> list[np.ndarray]:
        rng = np.random.default_rng(11)
        p = _param(rng.normal(size=4), 0.0)
        state = AdamState()
        config = TrainConfig(lr=0.05)
        trajectory = []
        for _ in range(20):
            p.grad[...] = rng.normal(size=4)
            assert adam_step([p], state, config)
            trajectory.append(p.value.copy())
        return trajectory

    for a, b in zip(run(), run()):
        np.testing.assert_array_equal(a, b)
