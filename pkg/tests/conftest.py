"""Shared test helpers."""

import numpy as np


def finite_difference_grad(f, theta: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    theta = np.asarray(theta, dtype=float)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        lo = theta.copy()
        hi = theta.copy()
        lo[i] -= h
        hi[i] += h
        grad[i] = (f(hi) - f(lo)) / (2.0 * h)
    return grad


def relative_error(got: np.ndarray, want: np.ndarray, floor: float = 1e-8) -> float:
    """Worst-case per-coordinate relative error with an absolute floor."""
    got = np.asarray(got, dtype=float)
    want = np.asarray(want, dtype=float)
    return float(np.max(np.abs(got - want) / np.maximum(np.abs(want), floor)))
