"""Tests for satatree.numeric.gradcheck and satatree.numeric.pca."""

import numpy as np
import pytest

from satatree.errors import DimensionError, NonFiniteError
from satatree.numeric import (
    Parameter,
    Tensor,
    check_gradients,
    grad_check,
    log_softmax,
    matmul,
    pca_decompose,
    pca_project,
    pick,
    scale,
    sigmoid,
    sum_,
)


def test_sigmoid_objective_passes():
    rng = np.random.default_rng(1)
    w = Parameter("w", rng.normal(size=(2, 3)))
    x = Tensor(rng.normal(size=3))
    assert grad_check(lambda: sum_(sigmoid(matmul(w.tensor(), x))), [w]) < 1e-6


def test_result_reports_worst_coordinate():
    w = Parameter("w", np.array([[0.5, -0.2]]))
    result = check_gradients(lambda: sum_(log_softmax(w.tensor())), [w])
    assert result.coordinates == 2
    assert result.max_rel_err < 1e-6


def test_wrong_analytic_gradient_is_detected():
    w = Parameter("w", np.array([1.0, 2.0]))
    result = check_gradients(lambda: sum_(scale(w.tensor(), 3.0)), [w], analytic={"w": np.zeros(2)})
    assert result.max_rel_err > 0.5
    assert result.worst_parameter == "w"


def test_cross_entropy_style_objective():
    w = Parameter("w", np.random.default_rng(2).normal(size=(3, 4)))
    assert grad_check(lambda: scale(sum_(pick(log_softmax(w.tensor()), [0, 3, 1])), -1.0), [w]) < 1e-6


def test_non_finite_objective_is_reported():
    w = Parameter("w", np.array([1.79]))
    with pytest.raises(NonFiniteError, match="perturbing w"):
        check_gradients(lambda: sum_(scale(w.tensor(), 1e308)), [w], eps=0.1, analytic={"w": np.zeros(1)})


def test_eps_must_be_positive():
    w = Parameter("w", np.ones(1))
    with pytest.raises(ValueError, match="eps"):
        grad_check(lambda: sum_(w.tensor()), [w], eps=0.0)


def test_pca_of_collinear_points():
    points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    axes = pca_decompose(points)
    np.testing.assert_allclose(axes.components[0], [np.sqrt(0.5), np.sqrt(0.5)])
    np.testing.assert_allclose(axes.eigenvalues[1], 0.0, atol=1e-12)
    projected = pca_project(points, k=1)
    np.testing.assert_allclose(projected[:, 0], [-np.sqrt(2), 0.0, np.sqrt(2)])


def test_pca_projection_is_centred():
    points = np.random.default_rng(3).normal(size=(10, 5))
    xy = pca_project(points, k=2)
    assert xy.shape == (10, 2)
    np.testing.assert_allclose(xy.mean(axis=0), 0.0, atol=1e-12)


def test_pca_needs_two_points():
    with pytest.raises(DimensionError, match="two points"):
        pca_decompose(np.ones((1, 3)))


def test_pca_rejects_too_many_axes():
    with pytest.raises(DimensionError, match="onto 3 axes"):
        pca_project(np.random.default_rng(0).normal(size=(4, 2)), k=3)


def test_pca_eigenvalues_carry_the_total_variance():
    points = np.random.default_rng(7).normal(size=(10, 5)) * [3.0, 1.0, 0.5, 2.0, 0.1]
    axes = pca_decompose(points)
    np.testing.assert_allclose(axes.eigenvalues.sum(), points.var(axis=0).sum())
    assert (np.diff(axes.eigenvalues) <= 0).all()

    full = pca_project(points, k=5)
    np.testing.assert_allclose(full @ axes.components, points - points.mean(axis=0), atol=1e-12)


def test_pca_first_axis_of_an_ellipse_is_the_major_axis():
    angles = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    ellipse = np.stack([5.0 * np.cos(angles), 1.0 * np.sin(angles)], axis=1)
    axes = pca_decompose(ellipse)
    np.testing.assert_allclose(np.abs(axes.components[0]), [1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(axes.components[1]), [0.0, 1.0], atol=1e-12)
