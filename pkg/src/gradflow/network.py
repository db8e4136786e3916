"""Fully connected feed-forward networks with exact reverse-mode gradients.

An :class:`Architecture` is a width tuple ``(d_0, ..., d_k)`` plus an
activation.  Hidden layers apply the activation componentwise; the last layer
is affine.  Parameters live in a single flat float64 vector laid out as
``(W_1 row-major, b_1, ..., W_k, b_k)``, so the parameter norm is a plain
Euclidean norm of one array.

Two gradient paths are provided: a per-example reference
(:func:`forward_backward`) and a vectorized batch path
(:func:`forward_backward_batch`) used by the training loops.  A test pins
their equivalence.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .activations import Activation, act_deriv, act_eval, parse_activation
from .errors import DimensionMismatch, NonFiniteState

__all__ = [
    "Architecture",
    "Uniform",
    "Normal",
    "GlorotUniform",
    "param_dim",
    "layer_shapes",
    "pack_params",
    "unpack_params",
    "forward",
    "forward_batch",
    "forward_backward",
    "forward_backward_batch",
    "init_params",
    "check_finite",
    "params_to_bytes",
    "params_from_bytes",
    "params_to_json",
    "params_from_json",
]


@dataclass(frozen=True)
class Architecture:
    """Layer widths ``(d_0, ..., d_k)``, k >= 1, with one activation kind."""

    widths: tuple[int, ...]
    activation: Activation

    def __post_init__(self) -> None:
        if len(self.widths) < 2:
            raise ValueError("an architecture needs at least input and output widths")
        if any(int(w) != w or w < 1 for w in self.widths):
            raise ValueError("all widths must be positive integers")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    @property
    def num_layers(self) -> int:
        """Number of affine layers k."""
        return len(self.widths) - 1

    @property
    def param_dim(self) -> int:
        return param_dim(self)


def param_dim(arch: Architecture) -> int:
    """Total parameter count: sum of d_i * (d_{i-1} + 1) over layers."""
    w = arch.widths
    return sum(w[i] * (w[i - 1] + 1) for i in range(1, len(w)))


def layer_shapes(arch: Architecture) -> list[tuple[int, int]]:
    """Per-layer (rows, cols) weight shapes, in layer order."""
    w = arch.widths
    return [(w[i], w[i - 1]) for i in range(1, len(w))]


def unpack_params(arch: Architecture, theta: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Views of theta as [(W_1, b_1), ..., (W_k, b_k)] without copying."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_dim(arch),):
        raise DimensionMismatch(
            f"theta has shape {theta.shape}, expected ({param_dim(arch)},)"
        )
    layers = []
    pos = 0
    for rows, cols in layer_shapes(arch):
        w = theta[pos : pos + rows * cols].reshape(rows, cols)
        pos += rows * cols
        b = theta[pos : pos + rows]
        pos += rows
        layers.append((w, b))
    return layers


def pack_params(arch: Architecture, layers: list[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Flatten [(W_i, b_i), ...] blocks into one parameter vector."""
    if len(layers) != arch.num_layers:
        raise DimensionMismatch(f"expected {arch.num_layers} layers, got {len(layers)}")
    parts = []
    for (rows, cols), (w, b) in zip(layer_shapes(arch), layers):
        w = np.asarray(w, dtype=float)
        b = np.asarray(b, dtype=float)
        if w.shape != (rows, cols) or b.shape != (rows,):
            raise DimensionMismatch(
                f"layer block shapes {w.shape}/{b.shape} do not match ({rows},{cols})/({rows},)"
            )
        parts.append(w.reshape(-1))
        parts.append(b)
    return np.concatenate(parts)


def check_finite(theta: np.ndarray) -> np.ndarray:
    """Raise NonFiniteState if any parameter entry is NaN or infinite."""
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise NonFiniteState("parameter vector contains NaN or Inf")
    return theta


def _as_input(arch: Architecture, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (arch.input_dim,):
        raise DimensionMismatch(f"input has shape {x.shape}, expected ({arch.input_dim},)")
    return x


def forward(arch: Architecture, theta: np.ndarray, x) -> np.ndarray:
    """Network response at a single input: hidden activations, affine last layer."""
    x = _as_input(arch, x)
    layers = unpack_params(arch, theta)
    a = x
    for w, b in layers[:-1]:
        a = act_eval(arch.activation, w @ a + b)
    w, b = layers[-1]
    return w @ a + b


def forward_batch(arch: Architecture, theta: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Vectorized response for a batch: xs is (N, d_0), result (N, d_k)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != arch.input_dim:
        raise DimensionMismatch(f"batch has shape {xs.shape}, expected (N, {arch.input_dim})")
    layers = unpack_params(arch, theta)
    a = xs
    for w, b in layers[:-1]:
        a = act_eval(arch.activation, a @ w.T + b)
    w, b = layers[-1]
    return a @ w.T + b


def forward_backward(
    arch: Architecture, theta: np.ndarray, x, dLdy
) -> tuple[np.ndarray, np.ndarray]:
    """Response y and the exact gradient of <dLdy, response(x)> with respect to theta."""
    x = _as_input(arch, x)
    dLdy = np.atleast_1d(np.asarray(dLdy, dtype=float))
    if dLdy.shape != (arch.output_dim,):
        raise DimensionMismatch(
            f"upstream gradient has shape {dLdy.shape}, expected ({arch.output_dim},)"
        )
    layers = unpack_params(arch, theta)
    kind = arch.activation

    # forward pass, keeping pre-activations
    acts = [x]
    pre = []
    a = x
    for w, b in layers[:-1]:
        z = w @ a + b
        pre.append(z)
        a = act_eval(kind, z)
        acts.append(a)
    w, b = layers[-1]
    y = w @ a + b

    grad_layers: list[tuple[np.ndarray, np.ndarray]] = [(None, None)] * len(layers)
    delta = dLdy
    grad_layers[-1] = (np.outer(delta, acts[-1]), delta.copy())
    for i in range(len(layers) - 2, -1, -1):
        w_next = layers[i + 1][0]
        delta = (w_next.T @ delta) * act_deriv(kind, pre[i])
        grad_layers[i] = (np.outer(delta, acts[i]), delta.copy())
    return y, pack_params(arch, grad_layers)


def forward_backward_batch(
    arch: Architecture,
    theta: np.ndarray,
    xs: np.ndarray,
    dLdys: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Batch responses and the weighted sum of per-example gradients.

    Equivalent to summing ``weights[i] * forward_backward(..., xs[i],
    dLdys[i])`` but vectorized; with ``weights=None`` all weights are 1.
    """
    xs = np.asarray(xs, dtype=float)
    dLdys = np.asarray(dLdys, dtype=float)
    if xs.ndim != 2 or xs.shape[1] != arch.input_dim:
        raise DimensionMismatch(f"batch has shape {xs.shape}, expected (N, {arch.input_dim})")
    if dLdys.shape != (xs.shape[0], arch.output_dim):
        raise DimensionMismatch(
            f"upstream gradients have shape {dLdys.shape}, expected "
            f"({xs.shape[0]}, {arch.output_dim})"
        )
    layers = unpack_params(arch, theta)
    kind = arch.activation

    acts = [xs]
    pre = []
    a = xs
    for w, b in layers[:-1]:
        z = a @ w.T + b
        pre.append(z)
        a = act_eval(kind, z)
        acts.append(a)
    w, b = layers[-1]
    ys = a @ w.T + b

    if weights is None:
        delta = dLdys
    else:
        delta = dLdys * np.asarray(weights, dtype=float)[:, None]
    grad_layers: list[tuple[np.ndarray, np.ndarray]] = [(None, None)] * len(layers)
    grad_layers[-1] = (delta.T @ acts[-1], delta.sum(axis=0))
    for i in range(len(layers) - 2, -1, -1):
        w_next = layers[i + 1][0]
        delta = (delta @ w_next) * act_deriv(kind, pre[i])
        grad_layers[i] = (delta.T @ acts[i], delta.sum(axis=0))
    return ys, pack_params(arch, grad_layers)


# ---------------------------------------------------------------------------
# initialization schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Uniform:
    """Every weight and bias entry drawn from U(low, high)."""

    low: float
    high: float


@dataclass(frozen=True)
class Normal:
    """Every weight and bias entry drawn from N(mean, std^2)."""

    mean: float
    std: float


@dataclass(frozen=True)
class GlorotUniform:
    """Weights from U(+-sqrt(6/(fan_in+fan_out))), biases zero."""


def init_params(arch: Architecture, scheme, seed) -> np.ndarray:
    """Deterministic parameter initialization for the given seed."""
    rng = np.random.default_rng(seed)
    layers = []
    for rows, cols in layer_shapes(arch):
        if isinstance(scheme, Uniform):
            w = rng.uniform(scheme.low, scheme.high, size=(rows, cols))
            b = rng.uniform(scheme.low, scheme.high, size=rows)
        elif isinstance(scheme, Normal):
            w = rng.normal(scheme.mean, scheme.std, size=(rows, cols))
            b = rng.normal(scheme.mean, scheme.std, size=rows)
        elif isinstance(scheme, GlorotUniform):
            bound = np.sqrt(6.0 / (rows + cols))
            w = rng.uniform(-bound, bound, size=(rows, cols))
            b = np.zeros(rows)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        layers.append((w, b))
    return pack_params(arch, layers)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def params_to_bytes(arch: Architecture, theta: np.ndarray) -> bytes:
    """Widths (u32 count, then u32 widths) followed by little-endian f64 entries."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_dim(arch),):
        raise DimensionMismatch("theta length does not match the architecture")
    head = struct.pack("<I", len(arch.widths)) + struct.pack(
        f"<{len(arch.widths)}I", *arch.widths
    )
    return head + theta.astype("<f8").tobytes()


def params_from_bytes(blob: bytes) -> tuple[tuple[int, ...], np.ndarray]:
    """Inverse of params_to_bytes; returns (widths, theta)."""
    if len(blob) < 4:
        raise DimensionMismatch("parameter blob too short for its header")
    (count,) = struct.unpack_from("<I", blob, 0)
    need = 4 + 4 * count
    if len(blob) < need:
        raise DimensionMismatch("parameter blob too short for its widths")
    widths = struct.unpack_from(f"<{count}I", blob, 4)
    theta = np.frombuffer(blob, dtype="<f8", offset=need).copy()
    expected = sum(widths[i] * (widths[i - 1] + 1) for i in range(1, len(widths)))
    if theta.shape != (expected,):
        raise DimensionMismatch(
            f"parameter blob holds {theta.size} entries, widths imply {expected}"
        )
    return widths, theta


def params_to_json(arch: Architecture, theta: np.ndarray) -> str:
    """Human-readable serialization for small networks."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (param_dim(arch),):
        raise DimensionMismatch("theta length does not match the architecture")
    return json.dumps(
        {
            "widths": list(arch.widths),
            "activation": arch.activation.config_string(),
            "theta": theta.tolist(),
        }
    )


def params_from_json(text: str) -> tuple[Architecture, np.ndarray]:
    doc = json.loads(text)
    arch = Architecture(tuple(doc["widths"]), parse_activation(doc["activation"]))
    theta = np.asarray(doc["theta"], dtype=float)
    if theta.shape != (param_dim(arch),):
        raise DimensionMismatch("JSON theta length does not match its widths")
    return arch, theta
