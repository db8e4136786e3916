"""Tests for loss functions, weighted datasets, and expected-loss gradients."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_difference_grad, relative_error
from gradflow.activations import LOGISTIC, TANH, Activation
from gradflow.errors import DimensionMismatch, DomainError, ZeroMass
from gradflow.losses import (
    BCE,
    CROSS_ENTROPY_SOFTMAX,
    FIXED_LABELS,
    SQUARED_ERROR,
    LossKind,
    TargetSpec,
    WeightedDataset,
    expected_loss,
    expected_loss_grad,
    expected_loss_grad_reference,
    huber,
    loss_eval,
    loss_grad,
    polynomial_target,
    quadrature_dataset,
)
from gradflow.network import Architecture, Normal, init_params
from gradflow.polynomials import parse_poly


def test_squared_error_values_and_grad():
    assert loss_eval(SQUARED_ERROR, [1.0, 2.0], [1.0, 2.0]) == 0.0
    assert loss_eval(SQUARED_ERROR, [3.0], [1.0]) == 4.0
    np.testing.assert_allclose(loss_grad(SQUARED_ERROR, [3.0], [1.0]), [4.0])


def test_huber_values_and_grad():
    kind = huber(1.0)
    assert loss_eval(kind, [2.0], [0.0]) == pytest.approx(1.5)
    np.testing.assert_allclose(loss_grad(kind, [2.0], [0.0]), [1.0])
    assert loss_eval(kind, [0.3], [0.0]) == pytest.approx(0.045)
    np.testing.assert_allclose(loss_grad(kind, [0.3], [0.0]), [0.3])
    # continuous across the threshold
    below = loss_grad(kind, [0.999999], [0.0])[0]
    above = loss_grad(kind, [1.000001], [0.0])[0]
    assert abs(below - above) <= 2e-6


def test_bce_value_and_domain():
    assert loss_eval(BCE, [0.5], [1.0]) == pytest.approx(math.log(2.0))
    np.testing.assert_allclose(loss_grad(BCE, [0.25], [1.0]), [-4.0])
    with pytest.raises(DomainError):
        loss_eval(BCE, [1.5], [1.0])
    with pytest.raises(DomainError):
        loss_grad(BCE, [0.0], [0.0])


def test_cross_entropy_softmax():
    assert loss_eval(CROSS_ENTROPY_SOFTMAX, [0.0, 0.0], [1.0, 0.0]) == pytest.approx(
        math.log(2.0)
    )
    np.testing.assert_allclose(
        loss_grad(CROSS_ENTROPY_SOFTMAX, [0.0, 0.0], [1.0, 0.0]), [-0.5, 0.5]
    )
    # shift invariance of the fused softmax form
    z = np.array([1.0, -2.0, 0.3])
    y = np.array([0.0, 1.0, 0.0])
    assert loss_eval(CROSS_ENTROPY_SOFTMAX, z + 10.0, y) == pytest.approx(
        loss_eval(CROSS_ENTROPY_SOFTMAX, z, y), rel=1e-12
    )
    # stable at extreme logits
    assert np.isfinite(loss_eval(CROSS_ENTROPY_SOFTMAX, [600.0, -600.0], [0.0, 1.0]))


def test_loss_kind_validation():
    with pytest.raises(ValueError):
        LossKind("nope")
    with pytest.raises(ValueError):
        huber(0.0)


@settings(max_examples=200)
@given(
    # values rounded to 3 decimals so nonzero differences cannot underflow to 0
    yhat=st.lists(st.floats(-5, 5).map(lambda v: round(v, 3)), min_size=1, max_size=3),
    y=st.lists(st.floats(-5, 5).map(lambda v: round(v, 3)), min_size=1, max_size=3),
)
def test_loss_axiom_zero_iff_equal(yhat, y):
    if len(yhat) != len(y):
        yhat = yhat[: len(y)]
        y = y[: len(yhat)]
    if not yhat:
        return
    for kind in (SQUARED_ERROR, huber(0.7)):
        value = loss_eval(kind, yhat, y)
        if yhat == y:
            assert value == 0.0
        else:
            assert (value == 0.0) == (yhat == y)


def test_loss_grad_matches_finite_differences():
    rng = np.random.default_rng(4)
    for kind in (SQUARED_ERROR, huber(0.8), CROSS_ENTROPY_SOFTMAX):
        for _ in range(10):
            yhat = rng.uniform(-2.0, 2.0, size=3)
            y = rng.uniform(-2.0, 2.0, size=3)
            grad = loss_grad(kind, yhat, y)
            fd = finite_difference_grad(lambda v: loss_eval(kind, v, y), yhat, h=1e-6)
            assert relative_error(grad, fd, floor=1e-6) <= 1e-5


def test_weighted_dataset_validation():
    with pytest.raises(DomainError):
        WeightedDataset(np.zeros((2, 1)), np.zeros((2, 1)), np.array([0.6, 0.6]))
    with pytest.raises(DomainError):
        WeightedDataset(np.zeros((2, 1)), np.zeros((2, 1)), np.array([1.5, -0.5]))
    with pytest.raises(DimensionMismatch):
        WeightedDataset(np.zeros((2, 1)), np.zeros((3, 1)), np.array([0.5, 0.5]))
    data = WeightedDataset.uniform(np.zeros((4, 2)), np.zeros((4, 1)))
    np.testing.assert_allclose(data.weights, 0.25)


def test_expected_loss_exact_fit_is_zero():
    arch = Architecture((1, 1, 1), TANH)
    theta = np.array([0.0, 0.0, 0.0, 2.5])  # constant response 2.5
    data = WeightedDataset.uniform(np.linspace(-1, 1, 5)[:, None], np.full((5, 1), 2.5))
    assert expected_loss(arch, theta, data, FIXED_LABELS, SQUARED_ERROR) == 0.0


def test_expected_loss_single_point_equals_loss_eval():
    arch = Architecture((2, 3, 2), LOGISTIC)
    theta = init_params(arch, Normal(0.0, 1.0), 5)
    x = np.array([0.3, -0.7])
    y = np.array([0.2, 0.4])
    data = WeightedDataset(x[None, :], y[None, :], np.array([1.0]))
    from gradflow.network import forward

    want = loss_eval(SQUARED_ERROR, forward(arch, theta, x), y)
    assert expected_loss(arch, theta, data, FIXED_LABELS, SQUARED_ERROR) == pytest.approx(
        want, rel=1e-14
    )


def test_expected_loss_is_linear_in_weights():
    arch = Architecture((1, 2, 1), TANH)
    theta = init_params(arch, Normal(0.0, 1.0), 9)
    d1 = WeightedDataset.uniform(np.array([[0.1], [0.2]]), np.array([[1.0], [0.0]]))
    d2 = WeightedDataset.uniform(np.array([[-0.4]]), np.array([[0.5]]))
    for lam in (0.0, 0.25, 0.5, 1.0):
        mix = WeightedDataset.convex_combination(d1, d2, lam)
        l1 = expected_loss(arch, theta, d1, FIXED_LABELS, SQUARED_ERROR)
        l2 = expected_loss(arch, theta, d2, FIXED_LABELS, SQUARED_ERROR)
        lmix = expected_loss(arch, theta, mix, FIXED_LABELS, SQUARED_ERROR)
        assert lmix == pytest.approx(lam * l1 + (1 - lam) * l2, rel=1e-12, abs=1e-15)


def test_expected_loss_nonnegative_random():
    arch = Architecture((2, 3, 1), Activation("swish", 1.0))
    rng = np.random.default_rng(6)
    data = WeightedDataset.uniform(rng.uniform(-1, 1, (8, 2)), rng.normal(size=(8, 1)))
    for seed in range(5):
        theta = init_params(arch, Normal(0.0, 2.0), seed)
        assert expected_loss(arch, theta, data, FIXED_LABELS, SQUARED_ERROR) >= 0.0


def test_polynomial_target_evaluation():
    spec = polynomial_target(parse_poly("x0^2"), parse_poly("x0 + 1"))
    data = WeightedDataset.uniform(np.array([[2.0], [3.0]]), np.zeros((2, 2)))
    np.testing.assert_allclose(spec.targets_for(data), [[4.0, 3.0], [9.0, 4.0]])
    assert TargetSpec(None).targets_for(data) is data.targets


def test_expected_loss_grad_matches_reference_path():
    arch = Architecture((2, 4, 3, 2), TANH)
    rng = np.random.default_rng(15)
    theta = rng.normal(size=arch.param_dim)
    data = WeightedDataset(
        rng.uniform(-1, 1, (6, 2)),
        rng.normal(size=(6, 2)),
        np.full(6, 1.0 / 6.0),
    )
    for kind in (SQUARED_ERROR, huber(0.5), CROSS_ENTROPY_SOFTMAX):
        l_fast, g_fast = expected_loss_grad(arch, theta, data, FIXED_LABELS, kind)
        l_ref, g_ref = expected_loss_grad_reference(arch, theta, data, FIXED_LABELS, kind)
        assert l_fast == pytest.approx(l_ref, rel=1e-12)
        np.testing.assert_allclose(g_fast, g_ref, rtol=1e-12, atol=1e-14)


def test_expected_loss_grad_matches_finite_differences():
    arch = Architecture((2, 3, 2), LOGISTIC)
    rng = np.random.default_rng(18)
    theta = rng.normal(0.0, 0.5, size=arch.param_dim)
    data = WeightedDataset.uniform(rng.uniform(-1, 1, (5, 2)), rng.normal(size=(5, 2)))
    for kind in (SQUARED_ERROR, huber(1.0), CROSS_ENTROPY_SOFTMAX):
        _, grad = expected_loss_grad(arch, theta, data, FIXED_LABELS, kind)
        fd = finite_difference_grad(
            lambda t: expected_loss(arch, t, data, FIXED_LABELS, kind), theta
        )
        assert relative_error(grad, fd) <= 1e-5


def test_quadrature_uniform_1d():
    data = quadrature_dataset(lambda x: 1.0, [(0.0, 1.0)], 3)
    np.testing.assert_allclose(data.xs[:, 0], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(data.weights, [0.25, 0.5, 0.25])


def test_quadrature_spike_density():
    data = quadrature_dataset(lambda x: 1.0 if x[0] == 0.5 else 0.0, [(0.0, 1.0)], 3)
    np.testing.assert_allclose(data.weights, [0.0, 1.0, 0.0])


def test_quadrature_2d_corners():
    data = quadrature_dataset(lambda x: 1.0, [(-1.0, 1.0), (-1.0, 1.0)], 2)
    assert len(data) == 4
    np.testing.assert_allclose(data.weights, 0.25)


def test_quadrature_zero_mass():
    with pytest.raises(ZeroMass):
        quadrature_dataset(lambda x: 0.0, [(0.0, 1.0)], 3)


def test_quadrature_with_target_fn():
    data = quadrature_dataset(
        lambda x: 1.0, [(0.0, 1.0)], 3, target_fn=lambda x: [x[0] ** 2]
    )
    np.testing.assert_allclose(data.targets[:, 0], [0.0, 0.25, 1.0])


def test_quadrature_integrates_polynomial():
    # trapezoid with many nodes approximates the integral of x^2 over [0,1]
    data = quadrature_dataset(lambda x: 1.0, [(0.0, 1.0)], 201)
    approx = float(np.dot(data.weights, data.xs[:, 0] ** 2))
    assert approx == pytest.approx(1.0 / 3.0, abs=1e-4)
