"""Loss functions and weighted expected loss over finite datasets.

A :class:`WeightedDataset` is the common representation for every measure the
experiments use: empirical samples carry uniform weights, continuous densities
are discretized by tensor-product trapezoidal quadrature, and convex
combinations concatenate points with scaled weights.  Targets either live in
the dataset (``FIXED_LABELS``) or are produced on the fly by per-output
polynomials (:func:`polynomial_target`).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DimensionMismatch, DomainError, ZeroMass
from .network import (
    Architecture,
    forward,
    forward_backward,
    forward_backward_batch,
    forward_batch,
)
from .polynomials import Polynomial

__all__ = [
    "LossKind",
    "SQUARED_ERROR",
    "BCE",
    "CROSS_ENTROPY_SOFTMAX",
    "huber",
    "WeightedDataset",
    "TargetSpec",
    "FIXED_LABELS",
    "polynomial_target",
    "loss_eval",
    "loss_grad",
    "expected_loss",
    "expected_loss_grad",
    "expected_loss_grad_reference",
    "quadrature_dataset",
]


@dataclass(frozen=True)
class LossKind:
    """One of squared_error, bce, huber (with threshold delta), cross_entropy_softmax."""

    name: str
    delta: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in ("squared_error", "bce", "huber", "cross_entropy_softmax"):
            raise ValueError(f"unknown loss kind {self.name!r}")
        if self.name == "huber" and not self.delta > 0.0:
            raise ValueError("huber delta must be positive")


SQUARED_ERROR = LossKind("squared_error")
BCE = LossKind("bce")
CROSS_ENTROPY_SOFTMAX = LossKind("cross_entropy_softmax")


def huber(delta: float) -> LossKind:
    return LossKind("huber", delta)


def _check_pair(yhat: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    yhat = np.atleast_1d(np.asarray(yhat, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if yhat.shape != y.shape:
        raise DimensionMismatch(f"prediction {yhat.shape} vs target {y.shape}")
    return yhat, y


def _logsumexp(z: np.ndarray, axis=-1) -> np.ndarray:
    m = np.max(z, axis=axis, keepdims=True)
    return np.squeeze(m, axis) + np.log(np.sum(np.exp(z - m), axis=axis))


def loss_eval(kind: LossKind, yhat, y) -> float:
    """Per-example loss; vector outputs are summed over coordinates."""
    yhat, y = _check_pair(yhat, y)
    if kind.name == "squared_error":
        return float(np.sum((yhat - y) ** 2))
    if kind.name == "huber":
        u = np.abs(yhat - y)
        d = kind.delta
        return float(np.sum(np.where(u <= d, 0.5 * u * u, d * (u - 0.5 * d))))
    if kind.name == "bce":
        if np.any(yhat <= 0.0) or np.any(yhat >= 1.0):
            raise DomainError("binary cross-entropy needs predictions strictly inside (0,1)")
        return float(-np.sum(y * np.log(yhat) + (1.0 - y) * np.log1p(-yhat)))
    # cross_entropy_softmax: logits yhat against (one-hot or soft) target mass y
    return float(np.sum(y) * _logsumexp(yhat) - np.dot(y, yhat))


def loss_grad(kind: LossKind, yhat, y) -> np.ndarray:
    """Gradient of loss_eval in the prediction argument."""
    yhat, y = _check_pair(yhat, y)
    if kind.name == "squared_error":
        return 2.0 * (yhat - y)
    if kind.name == "huber":
        return np.clip(yhat - y, -kind.delta, kind.delta)
    if kind.name == "bce":
        if np.any(yhat <= 0.0) or np.any(yhat >= 1.0):
            raise DomainError("binary cross-entropy needs predictions strictly inside (0,1)")
        return -y / yhat + (1.0 - y) / (1.0 - yhat)
    z = yhat - np.max(yhat)
    softmax = np.exp(z) / np.sum(np.exp(z))
    return float(np.sum(y)) * softmax - y


def _loss_eval_batch(kind: LossKind, yhats: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized loss_eval over rows."""
    if kind.name == "squared_error":
        return np.sum((yhats - ys) ** 2, axis=1)
    if kind.name == "huber":
        u = np.abs(yhats - ys)
        d = kind.delta
        return np.sum(np.where(u <= d, 0.5 * u * u, d * (u - 0.5 * d)), axis=1)
    if kind.name == "bce":
        if np.any(yhats <= 0.0) or np.any(yhats >= 1.0):
            raise DomainError("binary cross-entropy needs predictions strictly inside (0,1)")
        return -np.sum(ys * np.log(yhats) + (1.0 - ys) * np.log1p(-yhats), axis=1)
    return np.sum(ys, axis=1) * _logsumexp(yhats, axis=1) - np.sum(ys * yhats, axis=1)


def _loss_grad_batch(kind: LossKind, yhats: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized loss_grad over rows."""
    if kind.name == "squared_error":
        return 2.0 * (yhats - ys)
    if kind.name == "huber":
        return np.clip(yhats - ys, -kind.delta, kind.delta)
    if kind.name == "bce":
        if np.any(yhats <= 0.0) or np.any(yhats >= 1.0):
            raise DomainError("binary cross-entropy needs predictions strictly inside (0,1)")
        return -ys / yhats + (1.0 - ys) / (1.0 - yhats)
    z = yhats - np.max(yhats, axis=1, keepdims=True)
    ez = np.exp(z)
    softmax = ez / np.sum(ez, axis=1, keepdims=True)
    return np.sum(ys, axis=1, keepdims=True) * softmax - ys


@dataclass(frozen=True)
class WeightedDataset:
    """Finite weighted point measure with per-point targets; weights sum to 1."""

    xs: np.ndarray  # (N, d0)
    targets: np.ndarray  # (N, dk)
    weights: np.ndarray  # (N,)

    def __post_init__(self) -> None:
        xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if xs.shape[0] < 1 or targets.shape[0] != xs.shape[0] or weights.shape != (xs.shape[0],):
            raise DimensionMismatch(
                f"dataset blocks disagree: xs {xs.shape}, targets {targets.shape}, "
                f"weights {weights.shape}"
            )
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(targets)) and np.all(np.isfinite(weights))):
            raise DomainError("dataset contains non-finite entries")
        if np.any(weights < 0.0):
            raise DomainError("dataset weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > 1e-12:
            raise DomainError(f"dataset weights sum to {weights.sum()!r}, expected 1")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.xs.shape[0]

    @staticmethod
    def uniform(xs: np.ndarray, targets: np.ndarray) -> "WeightedDataset":
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        n = xs.shape[0]
        return WeightedDataset(xs, targets, np.full(n, 1.0 / n))

    @staticmethod
    def convex_combination(
        first: "WeightedDataset", second: "WeightedDataset", lam: float
    ) -> "WeightedDataset":
        """The measure lam * first + (1 - lam) * second."""
        if not 0.0 <= lam <= 1.0:
            raise DomainError("mixture weight must lie in [0, 1]")
        return WeightedDataset(
            np.vstack([first.xs, second.xs]),
            np.vstack([first.targets, second.targets]),
            np.concatenate([lam * first.weights, (1.0 - lam) * second.weights]),
        )


@dataclass(frozen=True)
class TargetSpec:
    """Target map: per-output polynomials, or None to use the dataset's stored labels."""

    polys: tuple[Polynomial, ...] | None = None

    def targets_for(self, data: WeightedDataset) -> np.ndarray:
        if self.polys is None:
            return data.targets
        return np.column_stack([p.eval_batch(data.xs) for p in self.polys])


FIXED_LABELS = TargetSpec(None)


def polynomial_target(*polys: Polynomial) -> TargetSpec:
    if not polys:
        raise DomainError("polynomial target needs at least one output polynomial")
    return TargetSpec(tuple(polys))


def _target_matrix(arch: Architecture, data: WeightedDataset, target: TargetSpec) -> np.ndarray:
    ys = target.targets_for(data)
    if ys.shape != (len(data), arch.output_dim):
        raise DimensionMismatch(
            f"targets have shape {ys.shape}, expected ({len(data)}, {arch.output_dim})"
        )
    return ys


def expected_loss(
    arch: Architecture,
    theta: np.ndarray,
    data: WeightedDataset,
    target: TargetSpec,
    kind: LossKind,
) -> float:
    """Weighted average of per-point losses: sum_i w_i * loss(net(x_i), y_i)."""
    ys = _target_matrix(arch, data, target)
    yhats = forward_batch(arch, theta, data.xs)
    return float(np.dot(data.weights, _loss_eval_batch(kind, yhats, ys)))


def expected_loss_grad(
    arch: Architecture,
    theta: np.ndarray,
    data: WeightedDataset,
    target: TargetSpec,
    kind: LossKind,
) -> tuple[float, np.ndarray]:
    """Expected loss and its exact gradient in theta (vectorized batch path)."""
    ys = _target_matrix(arch, data, target)
    yhats = forward_batch(arch, theta, data.xs)
    values = _loss_eval_batch(kind, yhats, ys)
    dLdys = _loss_grad_batch(kind, yhats, ys)
    _, grad = forward_backward_batch(arch, theta, data.xs, dLdys, weights=data.weights)
    return float(np.dot(data.weights, values)), grad


def expected_loss_grad_reference(
    arch: Architecture,
    theta: np.ndarray,
    data: WeightedDataset,
    target: TargetSpec,
    kind: LossKind,
) -> tuple[float, np.ndarray]:
    """Per-example accumulation reference for the vectorized path (test oracle)."""
    ys = _target_matrix(arch, data, target)
    total = 0.0
    grad = np.zeros(arch.param_dim)
    for i in range(len(data)):
        yhat = forward(arch, theta, data.xs[i])
        total += data.weights[i] * loss_eval(kind, yhat, ys[i])
        _, g = forward_backward(arch, theta, data.xs[i], loss_grad(kind, yhat, ys[i]))
        grad += data.weights[i] * g
    return total, grad


def quadrature_dataset(
    density,
    box: list[tuple[float, float]],
    nodes_per_dim: int,
    target_fn=None,
    output_dim: int = 1,
) -> WeightedDataset:
    """Tensor-product trapezoidal discretization of a density on an interval box.

    ``density`` maps a point to a nonnegative value; weights are trapezoid
    weights times density values, renormalized to sum 1.  ``target_fn`` (point
    -> output vector) fills the targets; defaults to zeros.
    """
    if nodes_per_dim < 2:
        raise DomainError("need at least 2 quadrature nodes per dimension")
    dims = len(box)
    if nodes_per_dim**dims > 10**6:
        raise DomainError("quadrature grid would exceed 10^6 nodes")
    axes = [np.linspace(lo, hi, nodes_per_dim) for lo, hi in box]
    trap = np.ones(nodes_per_dim)
    trap[0] = trap[-1] = 0.5
    points = []
    weights = []
    for combo in product(range(nodes_per_dim), repeat=dims):
        x = np.array([axes[d][i] for d, i in enumerate(combo)])
        w = float(np.prod([trap[i] for i in combo])) * float(density(x))
        if w < 0.0:
            raise DomainError("density returned a negative value")
        points.append(x)
        weights.append(w)
    weights = np.array(weights)
    total = float(weights.sum())
    if total <= 0.0:
        raise ZeroMass("all quadrature weights are zero")
    xs = np.array(points)
    if target_fn is None:
        targets = np.zeros((len(points), output_dim))
    else:
        targets = np.array([np.atleast_1d(target_fn(x)) for x in xs], dtype=float)
    return WeightedDataset(xs, targets, weights / total)
