"""Tests for feed-forward responses, gradients, initialization, serialization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_difference_grad, relative_error
from gradflow.activations import (
    ALL_ACTIVATIONS,
    LOGISTIC,
    RELU,
    TANH,
    Activation,
)
from gradflow.errors import DimensionMismatch, NonFiniteState
from gradflow.network import (
    Architecture,
    GlorotUniform,
    Normal,
    Uniform,
    check_finite,
    forward,
    forward_backward,
    forward_backward_batch,
    forward_batch,
    init_params,
    pack_params,
    param_dim,
    params_from_bytes,
    params_from_json,
    params_to_bytes,
    params_to_json,
    unpack_params,
)


def test_param_dim_formula():
    assert param_dim(Architecture((1, 1), TANH)) == 2
    assert param_dim(Architecture((1, 10, 20, 10, 1), TANH)) == 461
    assert param_dim(Architecture((784, 256, 256, 10), TANH)) == 269_322
    assert param_dim(Architecture((2, 3, 1), TANH)) == 3 * 3 + 1 * 4


def test_architecture_validation():
    with pytest.raises(ValueError):
        Architecture((3,), TANH)
    with pytest.raises(ValueError):
        Architecture((3, 0, 1), TANH)


def test_forward_scalar_chain():
    arch = Architecture((1, 1, 1), TANH)
    theta = np.array([1.0, 0.0, 1.0, 0.0])
    assert forward(arch, theta, [0.0]) == pytest.approx([0.0])
    assert forward(arch, theta, [1.0]) == pytest.approx([0.76159415595576488812], rel=1e-14)


def test_forward_constant_through_zero_weights():
    arch = Architecture((1, 1, 1), LOGISTIC)
    for c in (-2.0, 0.0, 3.5):
        theta = np.array([0.0, 0.0, 0.0, c])
        assert forward(arch, theta, [17.0]) == pytest.approx([c + 0.0 * 17.0 + 0.5 * 0.0])
        # zero output weight passes only the output bias
        assert forward(arch, theta, [17.0])[0] == c


def test_forward_backward_affine():
    arch = Architecture((1, 1), TANH)
    theta = np.array([2.0, -1.0])
    y, grad = forward_backward(arch, theta, [3.0], [1.0])
    assert y == pytest.approx([5.0])
    np.testing.assert_allclose(grad, [3.0, 1.0])


def test_forward_backward_chain_at_origin():
    arch = Architecture((1, 1, 1), TANH)
    theta = np.array([1.0, 0.0, 1.0, 0.0])
    y, grad = forward_backward(arch, theta, [0.0], [1.0])
    assert y == pytest.approx([0.0])
    np.testing.assert_allclose(grad, [0.0, 1.0, 0.0, 1.0])


def test_forward_backward_zero_upstream():
    arch = Architecture((2, 3, 2), LOGISTIC)
    theta = init_params(arch, Normal(0.0, 1.0), 7)
    _, grad = forward_backward(arch, theta, [0.3, -0.4], [0.0, 0.0])
    np.testing.assert_array_equal(grad, np.zeros(arch.param_dim))


@pytest.mark.parametrize("kind", ALL_ACTIVATIONS, ids=lambda k: k.config_string())
def test_gradient_matches_finite_differences(kind):
    arch = Architecture((3, 5, 4, 2), kind)
    rng = np.random.default_rng(42)
    for _ in range(5):
        theta = rng.normal(0.0, 0.7, size=arch.param_dim)
        x = rng.uniform(-1.0, 1.0, size=3)
        dldy = rng.normal(size=2)
        _, grad = forward_backward(arch, theta, x, dldy)

        def scalar(t):
            return float(np.dot(dldy, forward(arch, t, x)))

        fd = finite_difference_grad(scalar, theta)
        assert relative_error(grad, fd) <= 1e-5


def test_gradient_sparsity_behind_zero_outgoing_weights():
    arch = Architecture((2, 4, 3, 1), TANH)
    rng = np.random.default_rng(3)
    theta = rng.normal(size=arch.param_dim)
    layers = unpack_params(arch, theta.copy())
    layers[1][0][:] = 0.0  # zero the weights leaving layer 1
    theta_zeroed = pack_params(arch, layers)
    _, grad = forward_backward(arch, theta_zeroed, [0.5, -0.2], [1.0])
    blocks = unpack_params(arch, grad)
    np.testing.assert_array_equal(blocks[0][0], 0.0)
    np.testing.assert_array_equal(blocks[0][1], 0.0)


def test_pack_unpack_roundtrip_bit_exact():
    arch = Architecture((3, 4, 2), TANH)
    rng = np.random.default_rng(11)
    theta = rng.normal(size=arch.param_dim)
    again = pack_params(arch, unpack_params(arch, theta))
    np.testing.assert_array_equal(theta, again)


def test_relu_backprop_uses_zero_subgradient_at_kink():
    arch = Architecture((1, 1, 1), RELU)
    theta = np.array([1.0, 0.0, 1.0, 0.0])  # pre-activation exactly 0
    _, grad = forward_backward(arch, theta, [0.0], [1.0])
    np.testing.assert_allclose(grad, [0.0, 0.0, 0.0, 1.0])


def test_init_degenerate_uniform_is_zero():
    arch = Architecture((2, 3, 1), TANH)
    np.testing.assert_array_equal(init_params(arch, Uniform(0.0, 0.0), 5), 0.0)


def test_init_deterministic():
    arch = Architecture((2, 3, 1), TANH)
    for scheme in (Uniform(-1.0, 1.0), Normal(0.0, 1.0), GlorotUniform()):
        a = init_params(arch, scheme, 123)
        b = init_params(arch, scheme, 123)
        np.testing.assert_array_equal(a, b)
        c = init_params(arch, scheme, 124)
        assert not np.array_equal(a, c)


def test_glorot_bounds_and_zero_biases():
    arch = Architecture((2, 3, 1), TANH)
    theta = init_params(arch, GlorotUniform(), 99)
    (w1, b1), (w2, b2) = unpack_params(arch, theta)
    assert np.all(np.abs(w1) <= np.sqrt(6.0 / 5.0))
    assert np.all(np.abs(w2) <= np.sqrt(6.0 / 4.0))
    np.testing.assert_array_equal(b1, 0.0)
    np.testing.assert_array_equal(b2, 0.0)


def test_batch_forward_matches_single():
    arch = Architecture((2, 4, 3), Activation("swish", 1.5))
    rng = np.random.default_rng(8)
    theta = rng.normal(size=arch.param_dim)
    xs = rng.uniform(-2.0, 2.0, size=(9, 2))
    batch = forward_batch(arch, theta, xs)
    for i in range(9):
        np.testing.assert_allclose(batch[i], forward(arch, theta, xs[i]), rtol=1e-13)


def test_batch_backward_matches_weighted_sum_of_singles():
    arch = Architecture((3, 5, 2), TANH)
    rng = np.random.default_rng(21)
    theta = rng.normal(size=arch.param_dim)
    xs = rng.uniform(-1.0, 1.0, size=(7, 3))
    dldys = rng.normal(size=(7, 2))
    weights = rng.uniform(0.1, 1.0, size=7)
    _, batch_grad = forward_backward_batch(arch, theta, xs, dldys, weights)
    acc = np.zeros(arch.param_dim)
    for i in range(7):
        _, g = forward_backward(arch, theta, xs[i], dldys[i])
        acc += weights[i] * g
    np.testing.assert_allclose(batch_grad, acc, rtol=1e-12, atol=1e-14)


def test_dimension_mismatch_errors():
    arch = Architecture((2, 3, 1), TANH)
    theta = init_params(arch, Normal(0.0, 1.0), 1)
    with pytest.raises(DimensionMismatch):
        forward(arch, theta, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        forward(arch, theta[:-1], [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        forward_backward(arch, theta, [1.0, 2.0], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        forward_batch(arch, theta, np.zeros((4, 3)))


def test_check_finite():
    theta = np.array([1.0, np.nan])
    with pytest.raises(NonFiniteState):
        check_finite(theta)
    np.testing.assert_array_equal(check_finite(np.array([1.0, 2.0])), [1.0, 2.0])


def test_binary_serialization_roundtrip():
    arch = Architecture((2, 3, 1), TANH)
    theta = init_params(arch, Normal(0.0, 1.0), 77)
    widths, back = params_from_bytes(params_to_bytes(arch, theta))
    assert widths == (2, 3, 1)
    np.testing.assert_array_equal(back, theta)


def test_binary_serialization_truncation_detected():
    arch = Architecture((2, 3, 1), TANH)
    blob = params_to_bytes(arch, init_params(arch, Normal(0.0, 1.0), 77))
    with pytest.raises(DimensionMismatch):
        params_from_bytes(blob[:-8])


def test_json_serialization_roundtrip():
    arch = Architecture((1, 2, 1), Activation("swish", 2.0))
    theta = init_params(arch, Uniform(-0.5, 0.5), 13)
    arch2, theta2 = params_from_json(params_to_json(arch, theta))
    assert arch2 == arch
    np.testing.assert_array_equal(theta2, theta)


@settings(max_examples=50)
@given(
    seed=st.integers(0, 2**32 - 1),
    widths=st.lists(st.integers(1, 4), min_size=2, max_size=4),
)
def test_param_dim_matches_packed_length(seed, widths):
    arch = Architecture(tuple(widths), TANH)
    theta = init_params(arch, Normal(0.0, 1.0), seed)
    assert theta.shape == (param_dim(arch),)
    blocks = unpack_params(arch, theta)
    assert sum(w.size + b.size for w, b in blocks) == param_dim(arch)
