"""Tests for the Feynman-Kac Monte Carlo data layer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradflow.errors import AllZeroReference, DimensionMismatch, DomainError
from gradflow.kolmogorov import (
    BlackScholesSpec,
    HeatSpec,
    bs_payoff_sample,
    bs_payoff_samples,
    bs_sampler,
    default_bs_spec,
    default_heat_spec,
    heat_exact,
    heat_sampler,
    heat_terminal_sample,
    heat_terminal_samples,
    kolmogorov_batch,
    mc_reference,
    relative_mse,
)


# ---------------------------------------------------------------------------
# heat equation
# ---------------------------------------------------------------------------


def test_heat_degenerate_horizon_exact():
    spec = HeatSpec(dim=3, horizon=0.0)
    x = np.array([1.0, -2.0, 0.5])
    v = heat_terminal_sample(spec, x, np.random.default_rng(0))
    assert v == pytest.approx(float(x @ x), abs=0.0)


def test_heat_mean_matches_exact_at_origin():
    spec = default_heat_spec(2)
    rng = np.random.default_rng(123)
    samples = heat_terminal_samples(spec, np.zeros(2), rng, 1_000_000)
    stderr = samples.std(ddof=1) / np.sqrt(len(samples))
    assert abs(samples.mean() - 2.0) <= 3.0 * stderr
    assert heat_exact(spec, 1.0, np.zeros(2)) == 2.0


def test_heat_sample_variance_chi_square():
    # at x=0, T=1, d=1 the sample is Z^2 with variance Var(Z^2) = 2
    spec = default_heat_spec(1)
    samples = heat_terminal_samples(spec, np.zeros(1), np.random.default_rng(7), 1_000_000)
    assert samples.var(ddof=1) == pytest.approx(2.0, rel=0.05)


def test_heat_exact_forms():
    spec = HeatSpec(dim=4, horizon=2.0)
    x = np.array([1.0, 0.0, -1.0, 2.0])
    assert heat_exact(spec, 0.0, x) == pytest.approx(6.0)
    assert heat_exact(spec, 2.0, x) - heat_exact(spec, 1.0, x) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        heat_exact(spec, 3.0, x)


def test_heat_spec_validation():
    with pytest.raises(DomainError):
        HeatSpec(dim=0)
    with pytest.raises(DomainError):
        HeatSpec(dim=1, horizon=-1.0)
    with pytest.raises(DomainError):
        HeatSpec(dim=1, box=np.array([[1.0, 1.0]]))
    with pytest.raises(DimensionMismatch):
        heat_terminal_sample(HeatSpec(dim=2), np.zeros(3), np.random.default_rng(0))


# ---------------------------------------------------------------------------
# Black-Scholes
# ---------------------------------------------------------------------------


def test_bs_zero_vol_deterministic():
    spec = BlackScholesSpec(dim=2, sigmas=np.array([1e-8, 1e-8]))
    x = np.array([120.0, 80.0])
    expected = np.exp(-spec.rate) * max(
        float(np.max(x)) * np.exp(spec.rate - spec.carry) - spec.strike, 0.0
    )
    draws = bs_payoff_samples(spec, x, np.random.default_rng(5), 100)
    assert np.allclose(draws, expected, atol=1e-3)
    assert np.ptp(draws) <= 1e-3


def test_bs_zero_strike_martingale():
    # K=0 makes the discounted payoff e^{-rT} X_T with mean x e^{-cT}
    spec = BlackScholesSpec(
        dim=1, strike=0.0, sigmas=np.array([0.3]), box=np.array([[50.0, 150.0]])
    )
    x = np.array([100.0])
    draws = bs_payoff_samples(spec, x, np.random.default_rng(11), 1_000_000)
    stderr = draws.std(ddof=1) / np.sqrt(len(draws))
    assert abs(draws.mean() - 100.0 * np.exp(-spec.carry)) <= 3.0 * stderr


def test_bs_payoff_nonnegative_and_domain():
    spec = default_bs_spec(3)
    rng = np.random.default_rng(2)
    draws = bs_payoff_samples(spec, np.array([90.0, 100.0, 110.0]), rng, 10_000)
    assert np.all(draws >= 0.0)
    with pytest.raises(DomainError):
        bs_payoff_sample(spec, np.array([100.0, -1.0, 50.0]), rng)
    with pytest.raises(DomainError):
        BlackScholesSpec(dim=1, strike=-1.0)
    with pytest.raises(DomainError):
        BlackScholesSpec(dim=1, strike=0.0)  # zero strike needs explicit box
    with pytest.raises(DomainError):
        BlackScholesSpec(dim=1, sigmas=np.array([-0.1]))


def test_bs_default_sigmas_ramp():
    spec = default_bs_spec(5)
    assert np.allclose(spec.sigmas, [0.1, 0.2, 0.3, 0.4, 0.5])
    assert np.allclose(spec.box, np.tile([50.0, 150.0], (5, 1)))


# ---------------------------------------------------------------------------
# Monte Carlo reference estimator
# ---------------------------------------------------------------------------


def test_mc_reference_constant_sampler():
    est = mc_reference(lambda x, rng, n: np.full(n, 3.25), np.zeros(1), 50, 64, seed=0)
    assert est.mean == 3.25
    assert est.stderr == 0.0
    assert est.paths == 50 * 64


def test_mc_reference_heat_within_four_stderr():
    spec = default_heat_spec(1)
    est = mc_reference(heat_sampler(spec), np.zeros(1), rounds=100, paths=1024, seed=9)
    assert est.stderr > 0.0
    assert abs(est.mean - 1.0) <= 4.0 * est.stderr


def test_mc_reference_determinism():
    spec = default_bs_spec(2)
    x = np.array([100.0, 100.0])
    a = mc_reference(bs_sampler(spec), x, rounds=10, paths=256, seed=21)
    b = mc_reference(bs_sampler(spec), x, rounds=10, paths=256, seed=21)
    assert a == b


def test_mc_stderr_clt_scaling():
    # quadrupling paths should halve stderr (20-repeat median within 20%)
    spec = default_heat_spec(2)
    x = np.array([0.3, -0.4])
    ratios = []
    for rep in range(20):
        small = mc_reference(heat_sampler(spec), x, rounds=30, paths=64, seed=1000 + rep)
        big = mc_reference(heat_sampler(spec), x, rounds=30, paths=256, seed=5000 + rep)
        ratios.append(big.stderr / small.stderr)
    med = float(np.median(ratios))
    assert 0.5 * 0.8 <= med <= 0.5 * 1.2


# ---------------------------------------------------------------------------
# training batches
# ---------------------------------------------------------------------------


def test_batch_shapes_and_box():
    spec = default_heat_spec(3)
    data = kolmogorov_batch(spec, 1, np.random.default_rng(0))
    assert data.xs.shape == (1, 3) and data.targets.shape == (1, 1)
    assert data.weights[0] == 1.0

    data = kolmogorov_batch(spec, 500, np.random.default_rng(1))
    assert np.all(data.xs >= -1.0) and np.all(data.xs <= 1.0)
    assert np.allclose(data.weights, 1.0 / 500)

    bs = default_bs_spec(2)
    data = kolmogorov_batch(bs, 200, np.random.default_rng(2))
    assert np.all(data.xs >= 50.0) and np.all(data.xs <= 150.0)
    assert np.all(data.targets >= 0.0)


def test_batch_targets_unbiased_at_pinned_point():
    # near-degenerate box pins x, so target means estimate u(T, x)
    x = np.array([0.5, -0.25])
    eps = 1e-9
    box = np.column_stack([x - eps, x + eps])
    spec = HeatSpec(dim=2, horizon=1.0, box=box)
    rng = np.random.default_rng(33)
    targets = np.concatenate(
        [kolmogorov_batch(spec, 100, rng).targets[:, 0] for _ in range(200)]
    )
    stderr = targets.std(ddof=1) / np.sqrt(len(targets))
    want = heat_exact(spec, 1.0, x)
    assert abs(targets.mean() - want) <= 4.0 * stderr


def test_batch_determinism():
    spec = default_bs_spec(1)
    a = kolmogorov_batch(spec, 64, np.random.default_rng(77))
    b = kolmogorov_batch(spec, 64, np.random.default_rng(77))
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.targets, b.targets)


# ---------------------------------------------------------------------------
# relative MSE
# ---------------------------------------------------------------------------


def test_relative_mse_basics():
    r = np.array([1.0, -2.0, 3.0])
    assert relative_mse(r, r) == 0.0
    assert relative_mse(2.0 * r, r) == pytest.approx(1.0)
    eps = 1e-4
    approx = relative_mse(r + eps, r)
    assert approx == pytest.approx(3 * eps**2 / float(r @ r), rel=1e-6)


def test_relative_mse_errors():
    with pytest.raises(AllZeroReference):
        relative_mse(np.array([1.0]), np.array([0.0]))
    with pytest.raises(DimensionMismatch):
        relative_mse(np.array([1.0, 2.0]), np.array([1.0]))


@settings(max_examples=40, deadline=None)
@given(
    scale=st.floats(1e-3, 1e3),
    seed=st.integers(0, 1000),
)
def test_relative_mse_scale_invariant(scale, seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=5)
    r = rng.normal(size=5)
    if np.sum(r * r) == 0.0:
        return
    assert relative_mse(scale * p, scale * r) == pytest.approx(relative_mse(p, r), rel=1e-9)
