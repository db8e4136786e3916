"""Constructive approximation of polynomials by shallow networks.

The builder realizes a degree-n polynomial target as a one-hidden-layer
network by peeling homogeneous parts: the top part is decomposed into powers
of linear forms (one hidden unit per form, input weights a/j, bias at a point
where the activation's order-n Taylor coefficient alpha is nonzero, output
weight c*j^n/alpha), the Taylor polynomial each unit *actually* contributes is
subtracted from the remaining target, and the builder recurses on that
lower-degree residual.  Degree-1 remainders use a single slope unit; constant
remainders go exactly into the affine output bias.

The top stage uses the caller's scale j verbatim — growing j is the point of
the accuracy/parameter-norm trade-off experiments — while the residual stages
pick their own larger scales from a jet-tail error budget so every stage's
truncation error is O(1/j); see the scale helpers below.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import Activation, act_eval, act_jet, find_expansion_point
from .errors import ArchitectureTooSmall, DegenerateScale, DimensionMismatch
from .network import Architecture, pack_params, param_dim
from .polynomials import Polynomial, compose_affine, decompose_homogeneous, homogeneous_parts

__all__ = [
    "PowerFragment",
    "ShallowNet",
    "build_univariate_power_jet",
    "build_poly_shallow",
    "shallow_to_params",
    "embed_deep",
    "sup_error",
    "width_bound",
]

#: How many jet-tail coefficients enter the truncation-error budget.
_TAIL_TERMS = 13


@dataclass(frozen=True)
class PowerFragment:
    """Scalar unit data approximating x -> x^degree as scale grows.

    The induced function is ``(scale^degree / alpha) * (psi(x0 + x/scale) -
    T_{degree-1}psi(x0 + x/scale))`` where ``taylor`` holds the normalized
    Taylor coefficients of psi at x0 up to degree-1.
    """

    kind: Activation
    degree: int
    scale: float
    x0: float
    alpha: float
    taylor: tuple[float, ...]

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        u = x / self.scale
        t = np.zeros_like(u)
        for c in reversed(self.taylor):
            t = t * u + c
        full = act_eval(self.kind, self.x0 + u)
        return (self.scale**self.degree / self.alpha) * (full - t)


def build_univariate_power_jet(kind: Activation, n: int, j: float) -> PowerFragment:
    """Fragment whose induced scalar function approximates x -> x^n for large j."""
    if j <= 0.0:
        raise DegenerateScale(f"scale must be positive, got {j}")
    if n < 1:
        raise DegenerateScale(f"power must be >= 1, got {n}")
    x0, alpha = find_expansion_point(kind, n)
    taylor = act_jet(kind, x0, n - 1).coeffs if n >= 1 else ()
    return PowerFragment(kind, n, float(j), x0, alpha, taylor)


@dataclass(frozen=True)
class ShallowNet:
    """One-hidden-layer network with affine output: W2 psi(W1 x + b1) + b2."""

    w1: np.ndarray  # (h, m)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (r, h)
    b2: np.ndarray  # (r,)
    activation: Activation

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[0]

    def eval(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.w2 @ act_eval(self.activation, self.w1 @ x + self.b1) + self.b2

    def eval_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        hidden = act_eval(self.activation, xs @ self.w1.T + self.b1)
        return hidden @ self.w2.T + self.b2


def width_bound(degree: int, num_vars: int, num_outputs: int) -> int:
    """Hidden-width guarantee: num_outputs * (binom(degree+num_vars, num_vars) - num_vars)."""
    import math

    return num_outputs * (math.comb(degree + num_vars, num_vars) - num_vars)


def _tail_budget(kind: Activation, x0: float, order: int, reach: float) -> float:
    """Bound the jet tail sum |c_{order+1+k}/c_order| * reach^(order+1) * 10^-k.

    Valid once the unit argument stays within reach/scale <= 1/10, which the
    scale rules below enforce; 1/10 is inside every catalog member's
    convergence radius.
    """
    jet = act_jet(kind, x0, order + 1 + _TAIL_TERMS)
    alpha = jet.coeffs[order]
    total = 0.0
    for k in range(_TAIL_TERMS):
        total += abs(jet.coeffs[order + 1 + k] / alpha) * 10.0 ** (-k)
    return reach ** (order + 1) * total


_MACH_EPS = 2.220446049250313e-16


def _stage_scale(
    j: float,
    reaches: np.ndarray,
    budgets: np.ndarray,
    coeffs: np.ndarray,
    degree: int,
    noise_scale: float,
) -> float:
    """Residual-stage scale: smallest keeping stage truncation error <= 1/(8j).

    Output weights grow like scale^degree, so rounding noise in the affine
    output layer grows with scale while truncation error shrinks; the scale is
    capped near the bound-minimizing point beyond which larger scales only
    amplify noise.
    """
    lo = max(10.0 * float(np.max(reaches)), 1.0)
    tail = float(np.dot(np.abs(coeffs), budgets))
    want = max(lo, 8.0 * j * tail)
    noise_rate = _MACH_EPS * float(np.sum(np.abs(coeffs))) * noise_scale
    if noise_rate > 0.0 and tail > 0.0:
        balance = (tail / (degree * noise_rate)) ** (1.0 / (degree + 1.0))
        want = min(want, max(lo, balance))
    return want


def _build_scalar(
    kind: Activation, target: Polynomial, j: float, domain_radius: float
) -> tuple[list[tuple[np.ndarray, float, float]], float]:
    """Units (in_weights, in_bias, out_weight) and the exact output bias for one output."""
    m = target.num_vars
    units: list[tuple[np.ndarray, float, float]] = []
    out_bias = 0.0
    work = target
    top_stage = True

    while not work.is_zero():
        n = work.degree()
        if n == 0:
            out_bias += work.coeff((0,) * m)
            break
        if n == 1:
            x1, alpha1 = find_expansion_point(kind, 1)
            slope = np.array([work.coeff(tuple(int(i == v) for i in range(m))) for v in range(m)])
            const = work.coeff((0,) * m)
            reach = float(np.sum(np.abs(slope))) * domain_radius
            if top_stage:
                scale = float(j)
            else:
                budget = _tail_budget(kind, x1, 1, max(reach, 1e-300))
                noise = (abs(act_eval(kind, x1)) + 1.0) / abs(alpha1)
                scale = _stage_scale(
                    j, np.array([reach]), np.array([budget]), np.array([1.0]), 1, noise
                )
            out_w = scale / alpha1
            units.append((slope / scale, x1, out_w))
            out_bias += const - out_w * act_eval(kind, x1)
            break

        x0, alpha = find_expansion_point(kind, n)
        parts = homogeneous_parts(work)
        deco = decompose_homogeneous(parts[n])
        lower = work - parts[n]

        reaches = np.sum(np.abs(deco.forms), axis=1) * domain_radius
        if top_stage:
            scale = float(j)
        else:
            budgets = np.array([_tail_budget(kind, x0, n, r) for r in reaches])
            noise = (abs(act_eval(kind, x0)) + 1.0) / abs(alpha)
            scale = _stage_scale(j, reaches, budgets, deco.coefficients, n, noise)

        taylor = act_jet(kind, x0, n - 1).coeffs
        residual = lower
        for c, form in zip(deco.coefficients, deco.forms):
            if c == 0.0:
                continue
            out_w = c * scale**n / alpha
            units.append((form / scale, x0, out_w))
            # subtract exactly what this unit's Taylor polynomial contributes
            contributed = compose_affine(taylor, 0.0, form / scale, m).scale(out_w)
            residual = residual - contributed
        work = residual
        top_stage = False

    return units, out_bias


def build_poly_shallow(
    kind: Activation,
    targets: Polynomial | list[Polynomial],
    j: float,
    domain_radius: float = 1.0,
) -> ShallowNet:
    """Shallow network approximating the target polynomial(s) on the given box.

    Accuracy improves as j grows while the output-layer weights scale like
    powers of j — the mechanism by which near-zero loss forces large
    parameter norms.  Hidden width never exceeds
    ``r * (binom(n+m, m) - m)`` for degree-n, m-variable, r-output targets.
    """
    if j <= 0.0:
        raise DegenerateScale(f"scale must be positive, got {j}")
    if domain_radius <= 0.0:
        raise DegenerateScale(f"domain radius must be positive, got {domain_radius}")
    if isinstance(targets, Polynomial):
        targets = [targets]
    if not targets:
        raise DimensionMismatch("need at least one output polynomial")
    m = targets[0].num_vars
    if any(p.num_vars != m for p in targets):
        raise DimensionMismatch("all output polynomials must share one variable count")

    all_units: list[tuple[np.ndarray, float, float]] = []
    row_slices = []
    biases = []
    for p in targets:
        units, bias = _build_scalar(kind, p, float(j), float(domain_radius))
        row_slices.append((len(all_units), len(all_units) + len(units)))
        all_units.extend(units)
        biases.append(bias)

    h = max(len(all_units), 1)
    w1 = np.zeros((h, m))
    b1 = np.zeros(h)
    w2 = np.zeros((len(targets), h))
    for idx, (weights, bias, _) in enumerate(all_units):
        w1[idx] = weights
        b1[idx] = bias
    for out, (lo, hi) in enumerate(row_slices):
        for idx in range(lo, hi):
            w2[out, idx] = all_units[idx][2]
    return ShallowNet(w1, b1, w2, np.array(biases), kind)


def shallow_to_params(net: ShallowNet) -> tuple[Architecture, np.ndarray]:
    """Flatten a shallow net into the standard architecture + parameter vector."""
    arch = Architecture((net.input_dim, net.hidden_width, net.output_dim), net.activation)
    theta = pack_params(arch, [(net.w1, net.b1), (net.w2, net.b2)])
    return arch, theta


def sup_error(
    net: ShallowNet,
    targets: Polynomial | list[Polynomial],
    radius: float = 1.0,
    num_points: int = 1001,
    seed: int = 0,
) -> float:
    """Max absolute response-vs-target error over a grid in [-radius, radius]^m."""
    if isinstance(targets, Polynomial):
        targets = [targets]
    m = net.input_dim
    if m == 1:
        xs = np.linspace(-radius, radius, num_points)[:, None]
    elif m == 2:
        side = max(2, int(np.sqrt(num_points)))
        g = np.linspace(-radius, radius, side)
        xs = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    else:
        rng = np.random.default_rng(seed)
        xs = rng.uniform(-radius, radius, size=(num_points, m))
    preds = net.eval_batch(xs)
    truth = np.column_stack([p.eval_batch(xs) for p in targets])
    return float(np.max(np.abs(preds - truth)))


# ---------------------------------------------------------------------------
# embedding a shallow core into a deeper architecture
# ---------------------------------------------------------------------------


def embed_deep(arch: Architecture, core: ShallowNet, layer_index: int, j: float) -> np.ndarray:
    """Parameters realizing (identity layers) o core o (identity layers) in arch.

    Channels are passed through spare layers by near-identity units
    ``v -> psi(x1 + v/j)`` whose inverse affine map is folded into the next
    layer's weights; all unused connections are zero.  The response converges
    to the core's response on compacts as j grows.
    """
    if j <= 0.0:
        raise DegenerateScale(f"scale must be positive, got {j}")
    if arch.activation != core.activation:
        raise ArchitectureTooSmall("architecture and core use different activations")
    k = arch.num_layers
    if not 0 < layer_index < k:
        raise ArchitectureTooSmall(f"core layer index {layer_index} not a hidden layer of {arch.widths}")
    m, r = core.input_dim, core.output_dim
    if arch.input_dim != m or arch.output_dim != r:
        raise ArchitectureTooSmall(
            f"architecture ends {arch.input_dim}->{arch.output_dim} but core needs {m}->{r}"
        )
    if arch.widths[layer_index] < core.hidden_width:
        raise ArchitectureTooSmall(
            f"core layer needs width >= {core.hidden_width}, "
            f"got {arch.widths[layer_index]} at layer {layer_index}"
        )
    for l in range(1, layer_index):
        if arch.widths[l] < m:
            raise ArchitectureTooSmall(
                f"pre-core layer {l} needs width >= input dim {m}, got {arch.widths[l]}"
            )
    for l in range(layer_index + 1, k):
        if arch.widths[l] < r:
            raise ArchitectureTooSmall(
                f"post-core layer {l} needs width >= output dim {r}, got {arch.widths[l]}"
            )

    kind = arch.activation
    x1, alpha1 = find_expansion_point(kind, 1)
    psi_x1 = act_eval(kind, x1)

    layers: list[tuple[np.ndarray, np.ndarray]] = []
    # decoded value = decode_w @ hidden + decode_b, starting from the raw input
    channels = m
    decode_w = np.eye(m)
    decode_b = np.zeros(m)

    for l in range(1, k):
        width = arch.widths[l]
        prev_width = decode_w.shape[1]
        w = np.zeros((width, prev_width))
        b = np.zeros(width)
        if l == layer_index:
            w[: core.hidden_width] = core.w1 @ decode_w
            b[: core.hidden_width] = core.w1 @ decode_b + core.b1
            layers.append((w, b))
            channels = r
            decode_w = np.zeros((r, width))
            decode_w[:, : core.hidden_width] = core.w2
            decode_b = core.b2.copy()
        else:
            w[:channels] = decode_w / j
            b[:channels] = decode_b / j + x1
            layers.append((w, b))
            decode_w = np.zeros((channels, width))
            decode_w[np.arange(channels), np.arange(channels)] = j / alpha1
            decode_b = np.full(channels, -(j / alpha1) * psi_x1)

    # final affine layer recovers the decoded channels exactly
    layers.append((decode_w, decode_b))
    theta = pack_params(arch, layers)
    assert theta.shape == (param_dim(arch),)
    return theta
