"""Scalar activation functions, their derivatives, and truncated Taylor jets.

The package works with a fixed catalog of bounded-slope activations.  Seven of
them (logistic, tanh, softplus, swish, gelu, mish) are real-analytic; elu and
softsign are analytic away from 0 but only C^1 across it; relu is included for
comparison runs only.

Jets are truncated Taylor expansions stored with *normalized* coefficients
``coeffs[k] = f^(k)(x0) / k!``.  They are computed by power-series recurrences
(never by nested finite differences), so high orders stay accurate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf as _erf

from .errors import NoNonzeroCoefficient, UnsupportedOrder

__all__ = [
    "Activation",
    "Jet",
    "ProbeResult",
    "LOGISTIC",
    "TANH",
    "SOFTPLUS",
    "SWISH",
    "GELU",
    "MISH",
    "ELU",
    "SOFTSIGN",
    "RELU",
    "ALL_ACTIVATIONS",
    "ANALYTIC_ACTIVATIONS",
    "HARNESS_ACTIVATIONS",
    "DEFAULT_GRID",
    "parse_activation",
    "act_eval",
    "act_deriv",
    "act_jet",
    "jet_shift",
    "find_expansion_point",
    "sublinearity_probe",
]

_VALID_NAMES = (
    "logistic",
    "tanh",
    "softplus",
    "swish",
    "gelu",
    "mish",
    "elu",
    "softsign",
    "relu",
)

#: Names of the real-analytic catalog members (full jets at every basepoint).
_ANALYTIC = frozenset({"logistic", "tanh", "softplus", "swish", "gelu", "mish"})

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: Grid used by default when searching for an expansion point.
DEFAULT_GRID = np.linspace(-3.0, 3.0, 61)

#: Threshold below which a Taylor coefficient counts as numerically zero.
_COEFF_EPS = 1e-12


@dataclass(frozen=True)
class Activation:
    """One member of the activation catalog.

    ``beta`` is only meaningful for ``swish`` (slope of the inner logistic);
    it must be positive and is fixed at 1.0 for every other name.
    """

    name: str
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in _VALID_NAMES:
            raise ValueError(f"unknown activation name {self.name!r}")
        if self.name == "swish":
            if not (self.beta > 0.0 and math.isfinite(self.beta)):
                raise ValueError("swish slope beta must be a positive finite number")
        elif self.beta != 1.0:
            raise ValueError(f"{self.name} takes no beta parameter")

    @property
    def analytic(self) -> bool:
        return self.name in _ANALYTIC

    def config_string(self) -> str:
        if self.name == "swish":
            return f"swish:{self.beta:g}"
        return self.name

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.config_string()


LOGISTIC = Activation("logistic")
TANH = Activation("tanh")
SOFTPLUS = Activation("softplus")
SWISH = Activation("swish", 1.0)
GELU = Activation("gelu")
MISH = Activation("mish")
ELU = Activation("elu")
SOFTSIGN = Activation("softsign")
RELU = Activation("relu")

ALL_ACTIVATIONS = (LOGISTIC, TANH, SOFTPLUS, SWISH, GELU, MISH, ELU, SOFTSIGN, RELU)
ANALYTIC_ACTIVATIONS = (LOGISTIC, TANH, SOFTPLUS, SWISH, GELU, MISH)
#: The five activations exercised by the default experiment harness.
HARNESS_ACTIVATIONS = (LOGISTIC, TANH, SOFTPLUS, SWISH, GELU)


def parse_activation(text: str) -> Activation:
    """Parse a config string such as ``"tanh"`` or ``"swish:1.5"``."""
    text = text.strip()
    if ":" in text:
        name, _, arg = text.partition(":")
        name = name.strip()
        if name != "swish":
            raise ValueError(f"only swish takes a parameter, got {text!r}")
        try:
            beta = float(arg)
        except ValueError as exc:
            raise ValueError(f"bad swish parameter in {text!r}") from exc
        return Activation("swish", beta)
    return Activation(text)


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


def _logistic(x: np.ndarray) -> np.ndarray:
    # Stable on both tails: never exponentiates a positive argument.
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _gauss_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + _erf(x / _SQRT2))


def _gauss_pdf(x: np.ndarray) -> np.ndarray:
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def act_eval(kind: Activation, x):
    """Evaluate the activation at ``x`` (scalar or ndarray), stably for |x|<=700."""
    arr = np.asarray(x, dtype=float)
    name = kind.name
    if name == "logistic":
        out = _logistic(arr)
    elif name == "tanh":
        out = np.tanh(arr)
    elif name == "softplus":
        out = _softplus(arr)
    elif name == "swish":
        out = arr * _logistic(kind.beta * arr)
    elif name == "gelu":
        out = arr * _gauss_cdf(arr)
    elif name == "mish":
        out = arr * np.tanh(_softplus(arr))
    elif name == "elu":
        out = np.where(arr > 0.0, arr, np.expm1(np.minimum(arr, 0.0)))
    elif name == "softsign":
        out = arr / (1.0 + np.abs(arr))
    elif name == "relu":
        out = np.maximum(arr, 0.0)
    else:  # pragma: no cover - Activation validates names
        raise ValueError(name)
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(out)
    return out


def act_deriv(kind: Activation, x):
    """First derivative of the activation (relu uses the convention psi'(0)=0)."""
    arr = np.asarray(x, dtype=float)
    name = kind.name
    if name == "logistic":
        s = _logistic(arr)
        out = s * (1.0 - s)
    elif name == "tanh":
        t = np.tanh(arr)
        out = 1.0 - t * t
    elif name == "softplus":
        out = _logistic(arr)
    elif name == "swish":
        s = _logistic(kind.beta * arr)
        out = s + kind.beta * arr * s * (1.0 - s)
    elif name == "gelu":
        out = _gauss_cdf(arr) + arr * _gauss_pdf(arr)
    elif name == "mish":
        t = np.tanh(_softplus(arr))
        out = t + arr * (1.0 - t * t) * _logistic(arr)
    elif name == "elu":
        out = np.where(arr > 0.0, 1.0, np.exp(np.minimum(arr, 0.0)))
    elif name == "softsign":
        out = 1.0 / np.square(1.0 + np.abs(arr))
    elif name == "relu":
        out = np.where(arr > 0.0, 1.0, 0.0)
    else:  # pragma: no cover
        raise ValueError(name)
    if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# truncated power-series arithmetic (normalized Taylor coefficients)
# ---------------------------------------------------------------------------


def _series_square(c: np.ndarray, k: int) -> float:
    """Coefficient k of the Cauchy square of series ``c`` (uses c[0..k])."""
    return float(np.dot(c[: k + 1], c[k::-1]))


def _series_exp(u: np.ndarray) -> np.ndarray:
    """exp of a truncated series: e' = e * u'."""
    n = len(u) - 1
    e = np.zeros(n + 1)
    e[0] = math.exp(u[0])
    for k in range(1, n + 1):
        acc = 0.0
        for i in range(1, k + 1):
            acc += i * u[i] * e[k - i]
        e[k] = acc / k
    return e


def _series_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated quotient a/b (requires b[0] != 0)."""
    n = len(a) - 1
    q = np.zeros(n + 1)
    q[0] = a[0] / b[0]
    for k in range(1, n + 1):
        acc = a[k]
        for i in range(1, k + 1):
            acc -= b[i] * q[k - i]
        q[k] = acc / b[0]
    return q


def _logistic_series(x0: float, order: int) -> np.ndarray:
    s = np.zeros(order + 1)
    s[0] = act_eval(LOGISTIC, x0)
    for k in range(order):
        s[k + 1] = (s[k] - _series_square(s, k)) / (k + 1)
    return s


def _tanh_of_series(inner: np.ndarray) -> np.ndarray:
    """tanh of a truncated series: t' = (1 - t^2) * inner'."""
    n = len(inner) - 1
    dp = np.array([(i + 1) * inner[i + 1] for i in range(n)]) if n else np.empty(0)
    t = np.zeros(n + 1)
    t[0] = math.tanh(inner[0])
    for k in range(n):
        # coefficient k of (1 - t^2) * inner'; t[0..k] are already known
        acc = dp[k]
        for i in range(k + 1):
            acc -= _series_square(t, i) * dp[k - i]
        t[k + 1] = acc / (k + 1)
    return t


def _softplus_series(x0: float, order: int) -> np.ndarray:
    sp = np.zeros(order + 1)
    sp[0] = act_eval(SOFTPLUS, x0)
    if order >= 1:
        sig = _logistic_series(x0, order - 1)
        for k in range(order):
            sp[k + 1] = sig[k] / (k + 1)
    return sp


def _jet_coeffs(kind: Activation, x0: float, order: int) -> np.ndarray:
    name = kind.name
    if name == "relu":
        if order > 1:
            raise UnsupportedOrder("relu has no Taylor jet above order 1")
        c = np.zeros(order + 1)
        c[0] = max(x0, 0.0)
        if order >= 1:
            c[1] = 1.0 if x0 > 0.0 else 0.0
        return c
    if name == "elu":
        if x0 == 0.0:
            if order > 1:
                raise UnsupportedOrder("elu is only C^1 across 0")
            return np.array([0.0, 1.0][: order + 1])
        if x0 > 0.0:
            c = np.zeros(order + 1)
            c[0] = x0
            if order >= 1:
                c[1] = 1.0
            return c
        c = _series_exp(np.array([x0, 1.0] + [0.0] * max(0, order - 1))[: order + 1])
        c[0] = math.expm1(x0)
        return c
    if name == "softsign":
        if x0 == 0.0:
            if order > 1:
                raise UnsupportedOrder("softsign is only C^1 across 0")
            return np.array([0.0, 1.0][: order + 1])
        num = np.zeros(order + 1)
        den = np.zeros(order + 1)
        num[0] = x0
        if order >= 1:
            num[1] = 1.0
        if x0 > 0.0:
            den[0] = 1.0 + x0
            if order >= 1:
                den[1] = 1.0
        else:
            den[0] = 1.0 - x0
            if order >= 1:
                den[1] = -1.0
        return _series_div(num, den)

    # real-analytic catalog
    if name == "logistic":
        return _logistic_series(x0, order)
    if name == "tanh":
        inner = np.zeros(order + 1)
        inner[0] = x0
        if order >= 1:
            inner[1] = 1.0
        return _tanh_of_series(inner)
    if name == "softplus":
        return _softplus_series(x0, order)
    if name == "swish":
        b = kind.beta
        sig = _logistic_series(b * x0, order)
        scaled = sig * np.power(b, np.arange(order + 1))
        c = x0 * scaled
        c[1:] += scaled[:-1]
        return c
    if name == "gelu":
        # Phi' = pdf, pdf = exp(-x^2/2)/sqrt(2*pi)
        phi_cdf = np.zeros(order + 1)
        phi_cdf[0] = float(_gauss_cdf(np.asarray(x0)))
        if order >= 1:
            u = np.zeros(order)
            u[0] = -0.5 * x0 * x0
            if order >= 2:
                u[1] = -x0
            if order >= 3:
                u[2] = -0.5
            pdf = _INV_SQRT_2PI * _series_exp(u)
            for k in range(order):
                phi_cdf[k + 1] = pdf[k] / (k + 1)
        c = x0 * phi_cdf
        c[1:] += phi_cdf[:-1]
        return c
    if name == "mish":
        sp = _softplus_series(x0, order)
        t = _tanh_of_series(sp)
        c = x0 * t
        c[1:] += t[:-1]
        return c
    raise ValueError(name)  # pragma: no cover


@dataclass(frozen=True)
class Jet:
    """Truncated Taylor expansion; ``coeffs[k]`` is the k-th normalized coefficient."""

    kind: Activation
    basepoint: float
    coeffs: tuple[float, ...]

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def derivative(self, k: int) -> float:
        """The raw derivative value f^(k)(basepoint)."""
        return self.coeffs[k] * math.factorial(k)

    def poly_eval(self, x) -> np.ndarray:
        """Evaluate the jet's Taylor polynomial at ``x``."""
        h = np.asarray(x, dtype=float) - self.basepoint
        out = np.zeros_like(h)
        for c in reversed(self.coeffs):
            out = out * h + c
        return out


def act_jet(kind: Activation, x0: float, order: int) -> Jet:
    """Taylor jet of the activation at ``x0`` up to ``order``.

    Raises :class:`UnsupportedOrder` above the smoothness order (relu beyond 1
    anywhere; elu/softsign beyond 1 at the crossing point 0).
    """
    if order < 0:
        raise ValueError("jet order must be >= 0")
    coeffs = _jet_coeffs(kind, float(x0), order)
    # Pin the 0-th coefficient to the stable pointwise evaluation so the two
    # code paths agree to the last bit.
    coeffs[0] = act_eval(kind, float(x0))
    return Jet(kind, float(x0), tuple(float(c) for c in coeffs))


def jet_shift(jet: Jet, h: float) -> Jet:
    """Re-expand a jet at ``basepoint + h`` (binomial Taylor shift).

    The result is truncation-limited: coefficients near the top order lose
    accuracy proportional to the dropped tail.
    """
    n = jet.order
    c = np.asarray(jet.coeffs)
    shifted = np.zeros(n + 1)
    for i in range(n + 1):
        acc = 0.0
        for k in range(n, i - 1, -1):
            acc += c[k] * math.comb(k, i) * h ** (k - i)
        shifted[i] = acc
    return Jet(jet.kind, jet.basepoint + h, tuple(float(v) for v in shifted))


def find_expansion_point(
    kind: Activation, order: int, grid: np.ndarray | None = None
) -> tuple[float, float]:
    """Grid point maximizing |normalized coefficient of ``order``| and that coefficient.

    Raises :class:`NoNonzeroCoefficient` when the best coefficient magnitude is
    at most 1e-12.
    """
    if grid is None:
        grid = DEFAULT_GRID
    best_x = None
    best_c = 0.0
    for x0 in np.asarray(grid, dtype=float):
        c = act_jet(kind, float(x0), order).coeffs[order]
        # Strictly-greater with a tiny relative margin: symmetric activations
        # produce mathematical ties across 0 that float rounding would
        # otherwise break, and ties must go to the earliest grid point.
        if best_x is None or abs(c) > abs(best_c) * (1.0 + 1e-9):
            best_x, best_c = float(x0), float(c)
    if best_x is None or abs(best_c) <= _COEFF_EPS:
        raise NoNonzeroCoefficient(
            f"{kind} has no order-{order} coefficient above {_COEFF_EPS} on the grid"
        )
    return best_x, best_c


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of the bounded-slope probe."""

    sup_slope: float
    sup_slope_doubled: float
    bounded: bool


def sublinearity_probe(kind: Activation, radius: float, samples: int = 4001) -> ProbeResult:
    """Estimate sup |psi'| on [-radius, radius] and flag whether it looks bounded.

    The flag is true iff doubling the radius grew the estimate by at most 1%.
    """
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    xs = np.linspace(-radius, radius, samples)
    sup1 = float(np.max(np.abs(act_deriv(kind, xs))))
    xs2 = np.linspace(-2.0 * radius, 2.0 * radius, 2 * samples - 1)
    sup2 = float(np.max(np.abs(act_deriv(kind, xs2))))
    bounded = sup2 <= 1.01 * sup1 * (1.0 + 1e-12)
    return ProbeResult(sup1, sup2, bounded)
