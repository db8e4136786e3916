"""Discrete-time optimizers (SGD, bias-corrected Adam), EMA telemetry, minibatching.

Deliberately minimal: no weight decay, no momentum variants, no schedules —
the parameter-divergence experiments depend on the optimizer *not* shrinking
parameters toward the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, DomainError, NonFiniteGradient

__all__ = [
    "OptimizerConfig",
    "OptimizerState",
    "sgd",
    "adam",
    "opt_step",
    "EmaTracker",
    "ema_update",
    "minibatch_indices",
]

_KINDS = ("sgd", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    name: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.name not in _KINDS:
            raise DomainError(f"unknown optimizer {self.name!r}; expected one of {_KINDS}")
        if not (np.isfinite(self.lr) and self.lr > 0.0):
            raise DomainError(f"learning rate must be positive, got {self.lr}")
        if self.name == "adam":
            if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
                raise DomainError("adam betas must lie in [0, 1)")
            if self.eps <= 0.0:
                raise DomainError("adam eps must be positive")


@dataclass(frozen=True)
class OptimizerState:
    """Value-semantics optimizer state; opt_step returns a fresh instance."""

    config: OptimizerConfig
    step_count: int = 0
    first_moment: np.ndarray | None = None
    second_moment: np.ndarray | None = None


def sgd(lr: float) -> OptimizerState:
    return OptimizerState(OptimizerConfig("sgd", lr))


def adam(lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> OptimizerState:
    return OptimizerState(OptimizerConfig("adam", lr, beta1, beta2, eps))


def opt_step(
    state: OptimizerState, theta: np.ndarray, grad: np.ndarray
) -> tuple[np.ndarray, OptimizerState]:
    """One update; returns (new parameters, new state)."""
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape:
        raise DimensionMismatch(f"theta shape {theta.shape} vs grad shape {grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradient("gradient contains NaN or Inf")

    cfg = state.config
    t = state.step_count + 1
    if cfg.name == "sgd":
        return theta - cfg.lr * grad, replace(state, step_count=t)

    m = state.first_moment if state.first_moment is not None else np.zeros_like(theta)
    v = state.second_moment if state.second_moment is not None else np.zeros_like(theta)
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    new_theta = theta - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
    return new_theta, replace(state, step_count=t, first_moment=m, second_moment=v)


@dataclass(frozen=True)
class EmaTracker:
    """Exponential moving average with heavy memory: cur <- a*cur + (1-a)*new."""

    alpha: float
    current: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"EMA smoothing factor must lie in (0,1), got {self.alpha}")


def ema_update(tracker: EmaTracker, value: float) -> EmaTracker:
    value = float(value)
    if not np.isfinite(value):
        raise DomainError(f"EMA observed non-finite value {value}")
    if tracker.current is None:
        return replace(tracker, current=value)
    return replace(tracker, current=tracker.alpha * tracker.current + (1.0 - tracker.alpha) * value)


def minibatch_indices(dataset_size: int, batch: int, rng_seed: int, step: int) -> np.ndarray:
    """Uniform draw of `batch` distinct indices, deterministic in (seed, step)."""
    if batch < 1 or dataset_size < 1:
        raise DomainError("batch and dataset size must be positive")
    if batch > dataset_size:
        raise DimensionMismatch(f"batch {batch} exceeds dataset size {dataset_size}")
    rng = np.random.default_rng((rng_seed, step))
    return rng.choice(dataset_size, size=batch, replace=False)
