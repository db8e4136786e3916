"""Tests for gradient-flow integration, conservation checks, and classification."""

import numpy as np
import pytest

from gradflow.activations import ALL_ACTIVATIONS, RELU, TANH
from gradflow.errors import DomainError, NonFiniteState, SchemaMismatch, StepSizeUnderflow
from gradflow.flow import (
    AdaptiveRKF45,
    ClassifyThresholds,
    DichotomyVerdict,
    ExplicitEuler,
    FlowConfig,
    RK4,
    TrajectoryLog,
    TrajectorySample,
    VerdictTag,
    check_energy_identity,
    check_norm_bound,
    classify,
    integrate_flow,
    trajectory_from_csv,
    trajectory_to_csv,
)
from gradflow.losses import SQUARED_ERROR, WeightedDataset, polynomial_target
from gradflow.network import Architecture, GlorotUniform, forward_batch, init_params
from gradflow.polynomials import parse_poly


def quadratic_hook(theta):
    """L(theta) = 0.5|theta|^2, grad = theta — flow solution e^{-t} theta0."""
    return 0.5 * float(theta @ theta), theta.copy()


ADAPTIVE = AdaptiveRKF45(rel_tol=1e-8, abs_tol=1e-12, h_init=1e-3, h_min=1e-12, h_max=0.5)


def net_fixture():
    arch = Architecture((1, 4, 1), TANH)
    theta0 = init_params(arch, GlorotUniform(), seed=7)
    xs = np.linspace(-1.0, 1.0, 5)[:, None]
    data = WeightedDataset.uniform(xs, np.zeros((5, 1)))
    target = polynomial_target(parse_poly("x0^2", 1))
    return arch, theta0, data, target


# ---------------------------------------------------------------------------
# integrator accuracy
# ---------------------------------------------------------------------------


def test_quadratic_closed_form_adaptive():
    theta0 = np.array([3.0, -4.0])
    cfg = FlowConfig(ADAPTIVE, horizon=5.0)
    log = integrate_flow(None, theta0, None, None, None, cfg, loss_and_grad=quadratic_hook)
    exact = np.exp(-5.0) * theta0
    assert np.max(np.abs(log.final_theta - exact) / np.abs(exact)) <= 1e-6
    assert log.samples[0].t == 0.0
    assert log.samples[-1].t == pytest.approx(5.0, abs=1e-12)


def test_euler_exact_geometric_decay():
    cfg = FlowConfig(ExplicitEuler(0.5), horizon=5.0)
    log = integrate_flow(None, np.array([1.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    assert log.final_theta[0] == 0.5**10  # (1-h)^k exactly, h=1/2, k=10
    norms = log.column("theta_norm")
    assert norms[3] == 0.5**3


def test_rk4_quadratic_accuracy():
    cfg = FlowConfig(RK4(0.1), horizon=5.0)
    log = integrate_flow(None, np.array([2.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    # global error of the fourth-order scheme at h=0.1 is ~T*h^4/120 ~ 4e-6
    assert log.final_theta[0] == pytest.approx(2.0 * np.exp(-5.0), rel=1e-5)


def test_zero_gradient_start_constant_trajectory():
    # all-zero parameters + odd activation + zero targets: a critical point
    arch, _, data, _ = net_fixture()
    theta0 = np.zeros(arch.param_dim)
    target = polynomial_target(parse_poly("0", 1))
    cfg = FlowConfig(ADAPTIVE, horizon=10.0)
    log = integrate_flow(arch, theta0, data, target, SQUARED_ERROR, cfg)
    assert np.array_equal(log.final_theta, theta0)
    assert all(s.loss == 0.0 and s.grad_norm == 0.0 for s in log.samples)


def test_record_every_thins_samples():
    cfg1 = FlowConfig(ExplicitEuler(0.25), horizon=10.0, record_every=1)
    cfg4 = FlowConfig(ExplicitEuler(0.25), horizon=10.0, record_every=4)
    log1 = integrate_flow(None, np.array([1.0]), None, None, None, cfg1, loss_and_grad=quadratic_hook)
    log4 = integrate_flow(None, np.array([1.0]), None, None, None, cfg4, loss_and_grad=quadratic_hook)
    assert len(log1.samples) == 41  # t=0 plus 40 steps
    assert len(log4.samples) == 11  # t=0 plus every 4th step (40/4), final included
    assert {s.t for s in log4.samples} <= {s.t for s in log1.samples}
    assert log4.samples[-1].t == log1.samples[-1].t


def test_flow_errors():
    cfg = FlowConfig(AdaptiveRKF45(abs_tol=1e-9, h_min=1e-3, h_init=1e-2), horizon=1.0)

    def wrong_sign(theta):  # claims loss |theta|^2 but pushes uphill
        return float(theta @ theta), -theta

    with pytest.raises(StepSizeUnderflow):
        integrate_flow(None, np.array([1.0]), None, None, None, cfg, loss_and_grad=wrong_sign)

    calls = {"n": 0}

    def goes_nan(theta):
        calls["n"] += 1
        if calls["n"] > 1:
            return 1.0, np.array([np.nan])
        return 1.0, np.array([1.0])

    cfg_e = FlowConfig(ExplicitEuler(0.1), horizon=1.0)
    with pytest.raises(NonFiniteState):
        integrate_flow(None, np.array([1.0]), None, None, None, cfg_e, loss_and_grad=goes_nan)

    with pytest.raises(NonFiniteState):
        integrate_flow(None, np.array([np.inf]), None, None, None, cfg_e, loss_and_grad=quadratic_hook)

    with pytest.raises(DomainError):
        integrate_flow(None, np.array([1.0]), None, None, None, cfg_e)  # nothing to integrate

    with pytest.raises(DomainError):
        FlowConfig(ExplicitEuler(0.1), horizon=-1.0)
    with pytest.raises(DomainError):
        AdaptiveRKF45(h_min=1e-2, h_init=1e-3)


# ---------------------------------------------------------------------------
# conservation checks
# ---------------------------------------------------------------------------


def test_energy_identity_and_norm_bound_quadratic():
    cfg = FlowConfig(ADAPTIVE, horizon=5.0)
    log = integrate_flow(None, np.array([3.0, -4.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    assert check_energy_identity(log) <= 1e-3
    assert check_norm_bound(log) >= -1e-6


def test_energy_identity_constant_trajectory_zero():
    samples = tuple(TrajectorySample(float(t), 2.0, 1.0, 0.0, 0.0) for t in range(11))
    log = TrajectoryLog(samples)
    assert check_energy_identity(log) == 0.0
    assert check_norm_bound(log) >= 0.0


@pytest.mark.parametrize(
    "kind", [k for k in ALL_ACTIVATIONS if k.name != "relu"], ids=lambda k: k.name
)
def test_energy_and_norm_invariants_all_c1_kinds(kind):
    arch = Architecture((1, 4, 1), kind)
    theta0 = init_params(arch, GlorotUniform(), seed=11)
    xs = np.linspace(-1.0, 1.0, 5)[:, None]
    data = WeightedDataset.uniform(xs, np.zeros((5, 1)))
    target = polynomial_target(parse_poly("x0^2 - x0", 1))
    cfg = FlowConfig(ADAPTIVE, horizon=10.0)
    log = integrate_flow(arch, theta0, data, target, SQUARED_ERROR, cfg)
    assert check_energy_identity(log) <= 1e-3
    assert check_norm_bound(log) >= -1e-6
    losses = log.column("loss")
    assert np.all(np.diff(losses) <= 1e-12)  # monotone up to abs_tol


def test_norm_bound_detects_corruption():
    # theta_norm growing like the bound's sqrt with coefficient > 1/2:
    # doubling all norms then violates the bound (its sqrt term is unscaled)
    loss0 = 4.0
    ts = np.linspace(0.0, 10.0, 20)
    ok = tuple(
        TrajectorySample(float(t), loss0, 1.0 + 0.9 * np.sqrt(loss0 * t), 1.0, 1.0 + 0.9 * np.sqrt(loss0 * t))
        for t in ts
    )
    assert check_norm_bound(TrajectoryLog(ok)) >= 0.0
    doubled = tuple(
        TrajectorySample(s.t, s.loss, 2.0 * s.theta_norm, s.grad_norm, 2.0 * s.theta_norm * s.grad_norm)
        for s in ok
    )
    assert check_norm_bound(TrajectoryLog(doubled)) < 0.0


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def test_classify_quadratic_flow_converged():
    cfg = FlowConfig(AdaptiveRKF45(rel_tol=1e-8, abs_tol=1e-14, h_init=1e-3, h_min=1e-14, h_max=0.5), horizon=30.0)
    log = integrate_flow(None, np.array([3.0, -4.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    verdict = classify(log)
    assert verdict.tag is VerdictTag.CONVERGED
    assert verdict.final_grad_norm <= 1e-6 * 5.0


def test_classify_constant_critical_point():
    samples = tuple(TrajectorySample(float(t), 1.0, 2.0, 0.0, 0.0) for t in range(12))
    verdict = classify(TrajectoryLog(samples))
    assert verdict.tag is VerdictTag.CONVERGED


def synthetic_diverging_log():
    ts = np.linspace(1.0, 100.0, 50)
    return TrajectoryLog(
        tuple(
            TrajectorySample(float(t), 1.0 / t, np.sqrt(t), 1.0 / t, np.sqrt(t) / t)
            for t in ts
        )
    )


def test_classify_synthetic_diverging():
    verdict = classify(synthetic_diverging_log())
    assert verdict.tag is VerdictTag.DIVERGING
    assert verdict.theta_trend_slope > 0.0
    assert verdict.loss_limit_estimate == pytest.approx(0.0, abs=0.05)


def test_classify_short_horizon_undetermined():
    cfg = FlowConfig(ExplicitEuler(1e-4), horizon=1e-3)
    log = integrate_flow(None, np.array([5.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    assert len(log.samples) >= 10
    assert classify(log).tag is VerdictTag.UNDETERMINED


def test_classify_needs_ten_samples():
    samples = tuple(TrajectorySample(float(t), 1.0, 1.0, 1.0, 1.0) for t in range(9))
    with pytest.raises(DomainError):
        classify(TrajectoryLog(samples))


def test_classify_scale_invariance():
    base = synthetic_diverging_log()
    for c in (1e-3, 1.0, 1e4):
        scaled = TrajectoryLog(
            tuple(
                TrajectorySample(s.t, s.loss, c * s.theta_norm, c * s.grad_norm, c * c * s.norm_grad_product)
                for s in base.samples
            )
        )
        assert classify(scaled).tag is VerdictTag.DIVERGING
    # and for a converged log
    cfg = FlowConfig(AdaptiveRKF45(rel_tol=1e-8, abs_tol=1e-14, h_init=1e-3, h_min=1e-14, h_max=0.5), horizon=30.0)
    conv = integrate_flow(None, np.array([1.0, 1.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    for c in (1e-3, 1e4):
        scaled = TrajectoryLog(
            tuple(
                TrajectorySample(s.t, s.loss, c * s.theta_norm, c * s.grad_norm, c * c * s.norm_grad_product)
                for s in conv.samples
            )
        )
        assert classify(scaled).tag is VerdictTag.CONVERGED


def test_sample_product_invariant_enforced():
    with pytest.raises(DomainError):
        TrajectorySample(0.0, 1.0, 2.0, 3.0, 7.0)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def test_trajectory_csv_roundtrip():
    cfg = FlowConfig(ExplicitEuler(0.5), horizon=5.0)
    log = integrate_flow(None, np.array([1.0, 2.0]), None, None, None, cfg, loss_and_grad=quadratic_hook)
    text = trajectory_to_csv(log)
    assert text.splitlines()[0] == "t,loss,theta_norm,grad_norm,norm_grad_product"
    back = trajectory_from_csv(text)
    assert back.samples == log.samples


def test_trajectory_csv_schema_errors():
    with pytest.raises(SchemaMismatch):
        trajectory_from_csv("time,loss\n0,1\n")
    with pytest.raises(SchemaMismatch):
        trajectory_from_csv("t,loss,theta_norm,grad_norm,norm_grad_product\n0,1,2\n")
