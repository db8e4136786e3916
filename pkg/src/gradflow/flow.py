"""Gradient-flow integration, trajectory telemetry, and the dichotomy classifier.

The flow is theta'(t) = -grad L(theta(t)).  Along the exact flow the loss is
non-increasing, the energy identity  integral |theta'|^2 = L(0) - L(t)  holds,
and |theta(t)| <= |theta(0)| + sqrt(t * L(0)); the checks here measure how far
a discrete trajectory drifts from those exact-flow facts.

Every trajectory ends in exactly one of two regimes at large time — approach
to a critical point, or parameter escape to infinity with the loss flattening
onto a limit value — and `classify` applies finite-horizon trend tests for
the two regimes, reporting Undetermined when neither pattern is established.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .errors import DomainError, NonFiniteState, SchemaMismatch, StepSizeUnderflow
from .losses import LossKind, TargetSpec, WeightedDataset, expected_loss_grad
from .network import Architecture

__all__ = [
    "ExplicitEuler",
    "RK4",
    "AdaptiveRKF45",
    "FlowConfig",
    "TrajectorySample",
    "TrajectoryLog",
    "VerdictTag",
    "ClassifyThresholds",
    "DichotomyVerdict",
    "integrate_flow",
    "classify",
    "check_energy_identity",
    "check_norm_bound",
    "trajectory_to_csv",
    "trajectory_from_csv",
]


@dataclass(frozen=True)
class ExplicitEuler:
    h: float

    def __post_init__(self) -> None:
        if not self.h > 0.0:
            raise DomainError(f"step size must be positive, got {self.h}")


@dataclass(frozen=True)
class RK4:
    h: float

    def __post_init__(self) -> None:
        if not self.h > 0.0:
            raise DomainError(f"step size must be positive, got {self.h}")


@dataclass(frozen=True)
class AdaptiveRKF45:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    h_init: float = 1e-2
    h_min: float = 1e-10
    h_max: float = 1.0

    def __post_init__(self) -> None:
        if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
            raise DomainError("tolerances must be positive")
        if not 0.0 < self.h_min <= self.h_init <= self.h_max:
            raise DomainError(
                f"need 0 < h_min <= h_init <= h_max, got {self.h_min}, {self.h_init}, {self.h_max}"
            )


Integrator = ExplicitEuler | RK4 | AdaptiveRKF45


@dataclass(frozen=True)
class FlowConfig:
    integrator: Integrator
    horizon: float
    record_every: int = 1

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.record_every < 1:
            raise DomainError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class TrajectorySample:
    t: float
    loss: float
    theta_norm: float
    grad_norm: float
    norm_grad_product: float

    def __post_init__(self) -> None:
        expect = self.theta_norm * self.grad_norm
        if abs(self.norm_grad_product - expect) > 1e-12 * max(1.0, abs(expect)):
            raise DomainError(
                f"norm_grad_product {self.norm_grad_product} != "
                f"theta_norm*grad_norm {expect}"
            )


@dataclass(frozen=True)
class TrajectoryLog:
    samples: tuple[TrajectorySample, ...]
    final_theta: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


class VerdictTag(Enum):
    CONVERGED = "ConvergedToCriticalPoint"
    DIVERGING = "DivergingToInfinity"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class ClassifyThresholds:
    grad_eps: float = 1e-6
    norm_growth_factor: float = 1.5
    tail_fraction: float = 0.5


@dataclass(frozen=True)
class DichotomyVerdict:
    tag: VerdictTag
    final_grad_norm: float
    theta_trend_slope: float
    loss_limit_estimate: float
    product_trend_slope: float


LossAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _loss_and_grad_fn(
    arch: Architecture,
    data: WeightedDataset,
    target: TargetSpec,
    loss_kind: LossKind,
) -> LossAndGrad:
    def f(theta: np.ndarray) -> tuple[float, np.ndarray]:
        return expected_loss_grad(arch, theta, data, target, loss_kind)

    return f


def _eval(f: LossAndGrad, theta: np.ndarray) -> tuple[float, np.ndarray]:
    loss, grad = f(theta)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NonFiniteState("loss or gradient became non-finite along the flow")
    return float(loss), grad


def _sample(t: float, loss: float, theta: np.ndarray, grad: np.ndarray) -> TrajectorySample:
    tn = float(np.linalg.norm(theta))
    gn = float(np.linalg.norm(grad))
    return TrajectorySample(t, loss, tn, gn, tn * gn)


# Fehlberg 4(5) embedded pair.
_RKF_A = (
    (),
    (1.0 / 4.0,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3554.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
_RKF_B4 = (25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0)
_RKF_ERR = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)


def integrate_flow(
    arch: Architecture | None,
    theta0: np.ndarray,
    data: WeightedDataset | None,
    target: TargetSpec | None,
    loss_kind: LossKind | None,
    config: FlowConfig,
    loss_and_grad: LossAndGrad | None = None,
) -> TrajectoryLog:
    """Integrate theta' = -grad L from theta0 to the horizon.

    The loss/gradient map is built from (arch, data, target, loss_kind)
    unless `loss_and_grad` supplies it directly (used by tests integrating
    closed-form losses without a network).
    """
    if loss_and_grad is None:
        if arch is None or data is None or target is None or loss_kind is None:
            raise DomainError("need (arch, data, target, loss_kind) or an explicit loss_and_grad")
        loss_and_grad = _loss_and_grad_fn(arch, data, target, loss_kind)

    theta = np.array(theta0, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteState("initial parameters are non-finite")
    T = config.horizon
    # never overshoot; treat the horizon as reached within float slack
    t_end = T * (1.0 - 1e-14)

    loss, grad = _eval(loss_and_grad, theta)
    samples = [_sample(0.0, loss, theta, grad)]
    t = 0.0
    accepted = 0

    def record(force: bool = False) -> None:
        if force or accepted % config.record_every == 0:
            samples.append(_sample(t, loss, theta, grad))

    if isinstance(config.integrator, (ExplicitEuler, RK4)):
        h_nom = config.integrator.h
        fixed_rk4 = isinstance(config.integrator, RK4)
        while t < t_end:
            h = min(h_nom, T - t)
            if fixed_rk4:
                k1 = -grad
                k2 = -_eval(loss_and_grad, theta + 0.5 * h * k1)[1]
                k3 = -_eval(loss_and_grad, theta + 0.5 * h * k2)[1]
                k4 = -_eval(loss_and_grad, theta + h * k3)[1]
                theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            else:
                theta = theta - h * grad
            if not np.all(np.isfinite(theta)):
                raise NonFiniteState(f"parameters became non-finite at t={t + h}")
            t += h
            loss, grad = _eval(loss_and_grad, theta)
            accepted += 1
            record(force=t >= t_end)
        return TrajectoryLog(tuple(samples), theta)

    cfg = config.integrator
    h = cfg.h_init
    ks = [np.zeros_like(theta) for _ in range(6)]
    while t < t_end:
        h_try = min(h, T - t)
        ks[0] = -grad
        for i in range(1, 6):
            incr = sum(a * k for a, k in zip(_RKF_A[i], ks[:i]))
            ks[i] = -_eval(loss_and_grad, theta + h_try * incr)[1]
        candidate = theta + h_try * sum(b * k for b, k in zip(_RKF_B4, ks))
        err_vec = h_try * sum(e * k for e, k in zip(_RKF_ERR, ks))
        err = float(np.linalg.norm(err_vec))
        tol = cfg.abs_tol + cfg.rel_tol * float(np.linalg.norm(theta))

        accepted_step = False
        if err <= tol and np.all(np.isfinite(candidate)):
            new_loss, new_grad = _eval(loss_and_grad, candidate)
            if new_loss <= loss + cfg.abs_tol:
                theta = candidate
                t += h_try
                loss, grad = new_loss, new_grad
                accepted += 1
                record(force=t >= t_end)
                factor = 5.0 if err == 0.0 else min(5.0, max(0.1, 0.84 * (tol / err) ** 0.25))
                h = min(cfg.h_max, max(cfg.h_min, h_try * factor))
                accepted_step = True
        if not accepted_step:
            h = h_try / 2.0
            if h < cfg.h_min:
                raise StepSizeUnderflow(
                    f"step size {h} fell below h_min {cfg.h_min} at t={t}"
                )
    return TrajectoryLog(tuple(samples), theta)


def _tail(arr: np.ndarray, fraction: float) -> np.ndarray:
    n = len(arr)
    count = max(2, int(np.ceil(fraction * n)))
    return arr[n - count :]


def _ls_slope(ts: np.ndarray, ys: np.ndarray) -> float:
    if np.ptp(ts) == 0.0:
        return 0.0
    return float(np.polyfit(ts, ys, 1)[0])


def classify(log: TrajectoryLog, thresholds: ClassifyThresholds | None = None) -> DichotomyVerdict:
    """Finite-horizon dichotomy verdict; thresholds are scale-relative."""
    th = thresholds or ClassifyThresholds()
    if len(log.samples) < 10:
        raise DomainError(f"classification needs >= 10 samples, got {len(log.samples)}")
    ts = log.column("t")
    losses = log.column("loss")
    theta_norms = log.column("theta_norm")
    grad_norms = log.column("grad_norm")
    products = log.column("norm_grad_product")

    tail_t = _tail(ts, th.tail_fraction)
    tail_theta = _tail(theta_norms, th.tail_fraction)
    tail_loss = _tail(losses, th.tail_fraction)

    final_grad = float(grad_norms[-1])
    theta_slope = _ls_slope(tail_t, tail_theta)
    loss_limit = float(np.mean(tail_loss))
    product_slope = _ls_slope(tail_t, _tail(products, th.tail_fraction))

    grad_scale = float(np.max(grad_norms))
    theta_scale = float(np.max(theta_norms))
    converged = final_grad <= th.grad_eps * grad_scale and float(
        np.ptp(tail_theta)
    ) <= 0.01 * theta_scale

    initial_theta = float(theta_norms[0])
    diverging = (
        float(theta_norms[-1]) >= th.norm_growth_factor * initial_theta
        and theta_slope > 0.0
        and float(np.ptp(tail_loss)) <= 0.01 * float(losses[0])
    )

    if converged:
        tag = VerdictTag.CONVERGED
    elif diverging:
        tag = VerdictTag.DIVERGING
    else:
        tag = VerdictTag.UNDETERMINED
    return DichotomyVerdict(tag, final_grad, theta_slope, loss_limit, product_slope)


def check_energy_identity(
    log: TrajectoryLog, loss_evals: tuple[float, float] | None = None
) -> float:
    """Relative defect of  L(0) - L(T) = integral |grad|^2 dt  (trapezoid)."""
    ts = log.column("t")
    grads = log.column("grad_norm")
    losses = log.column("loss")
    loss0, loss_T = loss_evals if loss_evals is not None else (losses[0], losses[-1])
    dissipated = float(np.trapezoid(grads**2, ts))
    return abs((loss0 - loss_T) - dissipated) / max(loss0, 1e-12)


def check_norm_bound(log: TrajectoryLog) -> float:
    """Worst-case slack in |theta(t)| <= |theta(0)| + sqrt(t L(0)); >= 0 is clean."""
    ts = log.column("t")
    theta_norms = log.column("theta_norm")
    loss0 = log.samples[0].loss
    bounds = theta_norms[0] + np.sqrt(np.maximum(ts * loss0, 0.0))
    return float(np.min(bounds - theta_norms))


_CSV_HEADER = "t,loss,theta_norm,grad_norm,norm_grad_product"


def trajectory_to_csv(log: TrajectoryLog) -> str:
    out = io.StringIO()
    out.write(_CSV_HEADER + "\n")
    for s in log.samples:
        out.write(
            f"{s.t:.17g},{s.loss:.17g},{s.theta_norm:.17g},"
            f"{s.grad_norm:.17g},{s.norm_grad_product:.17g}\n"
        )
    return out.getvalue()


def trajectory_from_csv(text: str) -> TrajectoryLog:
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0] != _CSV_HEADER:
        raise SchemaMismatch(f"expected header {_CSV_HEADER!r}")
    samples = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 5:
            raise SchemaMismatch(f"expected 5 columns, got {len(parts)}: {ln!r}")
        t, loss, tn, gn, prod = (float(p) for p in parts)
        samples.append(TrajectorySample(t, loss, tn, gn, prod))
    return TrajectoryLog(tuple(samples))
