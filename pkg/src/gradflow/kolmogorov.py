"""Feynman-Kac Monte Carlo data generation for the heat and Black-Scholes PDEs.

The regression view: a network trained on (x, one-sample payoff) pairs with
squared error converges to x -> E[payoff(X_T^x)], the PDE solution.  Heat
flow has the closed form |x|^2 + d*t for comparison; Black-Scholes references
come from the Monte Carlo estimator with reported standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AllZeroReference, DimensionMismatch, DomainError
from .losses import WeightedDataset

__all__ = [
    "HeatSpec",
    "BlackScholesSpec",
    "McEstimate",
    "default_heat_spec",
    "default_bs_spec",
    "heat_terminal_sample",
    "heat_terminal_samples",
    "heat_exact",
    "bs_payoff_sample",
    "bs_payoff_samples",
    "heat_sampler",
    "bs_sampler",
    "mc_reference",
    "kolmogorov_batch",
    "relative_mse",
]


def _check_box(box: np.ndarray, dim: int) -> np.ndarray:
    box = np.asarray(box, dtype=float)
    if box.shape != (dim, 2):
        raise DimensionMismatch(f"box must have shape ({dim}, 2), got {box.shape}")
    if not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
        raise DomainError("box intervals must be finite and nondegenerate (lo < hi)")
    return box


@dataclass(frozen=True)
class HeatSpec:
    """Heat equation du/dt = 0.5 laplace u with u(0,x) = |x|^2."""

    dim: int
    horizon: float = 1.0
    box: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DomainError(f"dimension must be positive, got {self.dim}")
        if not self.horizon >= 0.0:
            raise DomainError(f"horizon must be nonnegative, got {self.horizon}")
        box = self.box if self.box is not None else np.tile([-1.0, 1.0], (self.dim, 1))
        object.__setattr__(self, "box", _check_box(box, self.dim))


@dataclass(frozen=True)
class BlackScholesSpec:
    """Discounted max-call payoff under independent cost-of-carry GBM coordinates."""

    dim: int
    horizon: float = 1.0
    rate: float = 0.05
    carry: float = 0.01
    strike: float = 100.0
    sigmas: np.ndarray = field(default=None)  # type: ignore[assignment]
    box: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise DomainError(f"dimension must be positive, got {self.dim}")
        if not self.horizon >= 0.0:
            raise DomainError(f"horizon must be nonnegative, got {self.horizon}")
        # strike 0 is the degenerate always-exercised case used by the
        # martingale diagnostics; it needs an explicit box (no K-scaled default)
        if not self.strike >= 0.0:
            raise DomainError(f"strike must be nonnegative, got {self.strike}")
        if self.strike == 0.0 and self.box is None:
            raise DomainError("zero-strike spec requires an explicit sample box")
        sigmas = (
            np.asarray(self.sigmas, dtype=float)
            if self.sigmas is not None
            else np.linspace(0.1, 0.5, self.dim)
        )
        if sigmas.shape != (self.dim,):
            raise DimensionMismatch(f"sigmas must have shape ({self.dim},), got {sigmas.shape}")
        if np.any(sigmas <= 0.0):
            raise DomainError("volatilities must be positive")
        box = (
            self.box
            if self.box is not None
            else np.tile([self.strike / 2.0, 3.0 * self.strike / 2.0], (self.dim, 1))
        )
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "box", _check_box(box, self.dim))


def default_heat_spec(dim: int, horizon: float = 1.0) -> HeatSpec:
    return HeatSpec(dim, horizon)


def default_bs_spec(dim: int, horizon: float = 1.0) -> BlackScholesSpec:
    return BlackScholesSpec(dim, horizon)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    paths: int


def _check_point(x, dim: int) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (dim,):
        raise DimensionMismatch(f"point must have shape ({dim},), got {x.shape}")
    return x


def heat_terminal_samples(spec: HeatSpec, x, rng: np.random.Generator, n: int) -> np.ndarray:
    """n independent draws of |x + sqrt(T) Z|^2, unbiased for u(T, x)."""
    x = _check_point(x, spec.dim)
    z = rng.standard_normal((n, spec.dim))
    pts = x[None, :] + np.sqrt(spec.horizon) * z
    return np.sum(pts * pts, axis=1)


def heat_terminal_sample(spec: HeatSpec, x, rng: np.random.Generator) -> float:
    return float(heat_terminal_samples(spec, x, rng, 1)[0])


def heat_exact(spec: HeatSpec, t: float, x) -> float:
    """Closed form u(t,x) = |x|^2 + d*t."""
    if not 0.0 <= t <= spec.horizon:
        raise DomainError(f"time {t} outside [0, {spec.horizon}]")
    x = _check_point(x, spec.dim)
    return float(x @ x) + spec.dim * t


def bs_payoff_samples(spec: BlackScholesSpec, x, rng: np.random.Generator, n: int) -> np.ndarray:
    """n draws of the discounted max-call payoff under exact GBM terminal law."""
    x = _check_point(x, spec.dim)
    if np.any(x <= 0.0):
        raise DomainError("initial prices must be positive")
    T = spec.horizon
    drift = (spec.rate - spec.carry - 0.5 * spec.sigmas**2) * T
    z = rng.standard_normal((n, spec.dim))
    terminal = x[None, :] * np.exp(drift[None, :] + np.sqrt(T) * spec.sigmas[None, :] * z)
    best = np.max(terminal, axis=1)
    return np.exp(-spec.rate * T) * np.maximum(best - spec.strike, 0.0)


def bs_payoff_sample(spec: BlackScholesSpec, x, rng: np.random.Generator) -> float:
    return float(bs_payoff_samples(spec, x, rng, 1)[0])


Sampler = Callable[[np.ndarray, np.random.Generator, int], np.ndarray]


def heat_sampler(spec: HeatSpec) -> Sampler:
    return lambda x, rng, n: heat_terminal_samples(spec, x, rng, n)


def bs_sampler(spec: BlackScholesSpec) -> Sampler:
    return lambda x, rng, n: bs_payoff_samples(spec, x, rng, n)


def mc_reference(
    sampler: Sampler, x, rounds: int, paths: int, seed: int
) -> McEstimate:
    """Mean of per-round means with stderr from their dispersion.

    Round k uses the independent substream seeded by (seed, k), so estimates
    are reproducible and round means exchangeable.
    """
    if rounds < 1 or paths < 1:
        raise DomainError("rounds and paths must be >= 1")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    means = np.empty(rounds)
    for k in range(rounds):
        rng = np.random.default_rng((seed, k))
        means[k] = float(np.mean(sampler(x, rng, paths)))
    mean = float(np.mean(means))
    stderr = float(np.std(means, ddof=1) / np.sqrt(rounds)) if rounds > 1 else 0.0
    return McEstimate(mean, stderr, rounds * paths)


def kolmogorov_batch(
    spec: HeatSpec | BlackScholesSpec, batch: int, rng: np.random.Generator
) -> WeightedDataset:
    """Training batch: uniform x in the box, one-sample unbiased target each."""
    if batch < 1:
        raise DomainError(f"batch must be >= 1, got {batch}")
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    xs = rng.uniform(lo, hi, size=(batch, spec.dim))
    if isinstance(spec, HeatSpec):
        pts = xs + np.sqrt(spec.horizon) * rng.standard_normal((batch, spec.dim))
        targets = np.sum(pts * pts, axis=1)
    else:
        T = spec.horizon
        drift = (spec.rate - spec.carry - 0.5 * spec.sigmas**2) * T
        z = rng.standard_normal((batch, spec.dim))
        terminal = xs * np.exp(drift[None, :] + np.sqrt(T) * spec.sigmas[None, :] * z)
        targets = np.exp(-spec.rate * T) * np.maximum(np.max(terminal, axis=1) - spec.strike, 0.0)
    return WeightedDataset(xs, targets[:, None], np.full(batch, 1.0 / batch))


def relative_mse(predictions: np.ndarray, references: np.ndarray) -> float:
    """Aggregate relative squared error: sum (p-r)^2 / sum r^2."""
    p = np.atleast_1d(np.asarray(predictions, dtype=float))
    r = np.atleast_1d(np.asarray(references, dtype=float))
    if p.shape != r.shape or p.ndim != 1 or len(p) < 1:
        raise DimensionMismatch(f"prediction/reference shapes disagree: {p.shape} vs {r.shape}")
    denom = float(np.sum(r * r))
    if denom == 0.0:
        raise AllZeroReference("reference vector is identically zero")
    return float(np.sum((p - r) ** 2) / denom)
