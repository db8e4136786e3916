"""Sparse multivariate polynomials and decomposition into powers of linear forms.

Polynomials are stored as maps from exponent tuples to float coefficients.
The decomposition writes a homogeneous degree-n polynomial in m variables as
sum_i c_i * <a_i, x>^n using the lattice of integer direction vectors
a_i = (1, lam_1, ..., lam_{m-1}) with lam in the simplex
S(n, m-1) = {lam in N^{m-1} : sum lam <= n}; the coefficients c_i solve a
generalized Vandermonde system.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DimensionMismatch, DomainError, IllConditioned

__all__ = [
    "Polynomial",
    "LinearFormDecomposition",
    "lattice_points",
    "monomials_of_degree",
    "multinomial",
    "linear_form_power",
    "compose_affine",
    "homogeneous_parts",
    "decompose_homogeneous",
    "parse_poly",
    "format_poly",
]


def lattice_points(n: int, m: int) -> list[tuple[int, ...]]:
    """All lam in N^m with sum(lam) <= n, sorted; |result| = binom(n+m, m)."""
    if n < 0 or m < 0:
        raise ValueError("lattice_points needs n, m >= 0")
    if m == 0:
        return [()]
    pts = [p for p in product(range(n + 1), repeat=m) if sum(p) <= n]
    pts.sort()
    return pts


def monomials_of_degree(n: int, m: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree exactly n in m variables, sorted."""
    if m == 0:
        return [()] if n == 0 else []
    pts = [p for p in product(range(n + 1), repeat=m) if sum(p) == n]
    pts.sort()
    return pts


def multinomial(n: int, parts: tuple[int, ...]) -> int:
    """n! / (parts_1! * ... * parts_r!); parts must sum to at most n.

    The implicit remainder n - sum(parts) is treated as one more part.
    """
    rest = n - sum(parts)
    if rest < 0:
        raise ValueError("parts sum exceeds n")
    out = math.factorial(n) // math.factorial(rest)
    for p in parts:
        out //= math.factorial(p)
    return out


class Polynomial:
    """Sparse polynomial: exponent-tuple -> coefficient; zero coefficients dropped."""

    __slots__ = ("num_vars", "terms")

    def __init__(self, num_vars: int, terms=None):
        if num_vars < 1:
            raise ValueError("num_vars must be >= 1")
        self.num_vars = int(num_vars)
        clean: dict[tuple[int, ...], float] = {}
        for mu, c in (terms or {}).items():
            mu = tuple(int(e) for e in mu)
            if len(mu) != self.num_vars or any(e < 0 for e in mu):
                raise DimensionMismatch(f"bad exponent tuple {mu} for {self.num_vars} vars")
            c = float(c)
            if c != 0.0:
                clean[mu] = clean.get(mu, 0.0) + c
                if clean[mu] == 0.0:
                    del clean[mu]
        self.terms = clean

    # -- constructors ------------------------------------------------------
    @staticmethod
    def zero(num_vars: int) -> "Polynomial":
        return Polynomial(num_vars, {})

    @staticmethod
    def constant(num_vars: int, c: float) -> "Polynomial":
        return Polynomial(num_vars, {(0,) * num_vars: c})

    @staticmethod
    def variable(num_vars: int, index: int) -> "Polynomial":
        if not 0 <= index < num_vars:
            raise DimensionMismatch(f"variable index {index} out of range")
        mu = [0] * num_vars
        mu[index] = 1
        return Polynomial(num_vars, {tuple(mu): 1.0})

    # -- queries -----------------------------------------------------------
    def coeff(self, mu: tuple[int, ...]) -> float:
        return self.terms.get(tuple(mu), 0.0)

    def degree(self) -> int:
        """Maximum total degree of a stored term; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(sum(mu) for mu in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.num_vars == other.num_vars
            and self.terms == other.terms
        )

    def __hash__(self):  # pragma: no cover - not used as dict key
        return hash((self.num_vars, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        return f"Polynomial({self.num_vars}, {format_poly(self)!r})"

    # -- arithmetic --------------------------------------------------------
    def _check_same_vars(self, other: "Polynomial") -> None:
        if self.num_vars != other.num_vars:
            raise DimensionMismatch("polynomials have different variable counts")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        self._check_same_vars(other)
        out = dict(self.terms)
        for mu, c in other.terms.items():
            out[mu] = out.get(mu, 0.0) + c
        return Polynomial(self.num_vars, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1.0)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.num_vars, {mu: c * v for mu, v in self.terms.items()})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        self._check_same_vars(other)
        out: dict[tuple[int, ...], float] = {}
        for mu, cu in self.terms.items():
            for nu, cv in other.terms.items():
                key = tuple(a + b for a, b in zip(mu, nu))
                out[key] = out.get(key, 0.0) + cu * cv
        return Polynomial(self.num_vars, out)

    # -- evaluation --------------------------------------------------------
    def eval(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.num_vars,):
            raise DimensionMismatch(f"point has shape {x.shape}, expected ({self.num_vars},)")
        total = 0.0
        for mu, c in self.terms.items():
            term = c
            for xi, e in zip(x, mu):
                if e:
                    term *= xi**e
            total += term
        return total

    def eval_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.num_vars:
            raise DimensionMismatch(f"batch has shape {xs.shape}, expected (N, {self.num_vars})")
        total = np.zeros(xs.shape[0])
        for mu, c in self.terms.items():
            term = np.full(xs.shape[0], c)
            for i, e in enumerate(mu):
                if e:
                    term *= xs[:, i] ** e
            total += term
        return total


def homogeneous_parts(p: Polynomial) -> dict[int, Polynomial]:
    """Split p into its degree slices; summing the parts recovers p."""
    buckets: dict[int, dict] = {}
    for mu, c in p.terms.items():
        buckets.setdefault(sum(mu), {})[mu] = c
    return {d: Polynomial(p.num_vars, terms) for d, terms in sorted(buckets.items())}


def linear_form_power(a, n: int, num_vars: int | None = None) -> Polynomial:
    """Expand <a, x>^n into monomials via the multinomial theorem."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    m = a.shape[0] if num_vars is None else num_vars
    if a.shape != (m,):
        raise DimensionMismatch("form length does not match num_vars")
    if n == 0:
        return Polynomial.constant(m, 1.0)
    terms = {}
    for mu in monomials_of_degree(n, m):
        c = float(_multinomial_full(n, mu))
        for ai, e in zip(a, mu):
            if e:
                c *= ai**e
        if c != 0.0:
            terms[mu] = c
    return Polynomial(m, terms)


def _multinomial_full(n: int, mu: tuple[int, ...]) -> int:
    """n! / prod(mu_i!) for an exponent tuple summing exactly to n."""
    out = math.factorial(n)
    for e in mu:
        out //= math.factorial(e)
    return out


def compose_affine(coeffs, t0: float, a, num_vars: int) -> Polynomial:
    """The polynomial sum_e coeffs[e] * (t0 + <a, x>)^e in num_vars variables."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.shape != (num_vars,):
        raise DimensionMismatch("form length does not match num_vars")
    out = Polynomial.zero(num_vars)
    for e, q in enumerate(coeffs):
        if q == 0.0:
            continue
        # (t0 + <a,x>)^e = sum_k C(e,k) t0^(e-k) <a,x>^k
        for k in range(e + 1):
            scale = q * math.comb(e, k) * t0 ** (e - k)
            if scale != 0.0:
                out = out + linear_form_power(a, k, num_vars).scale(scale)
    return out


@dataclass(frozen=True)
class LinearFormDecomposition:
    """p0(x) = sum_i coefficients[i] * <forms[i], x>^degree."""

    degree: int
    coefficients: np.ndarray  # (N,)
    forms: np.ndarray  # (N, m) integer direction vectors, first entry 1

    def eval(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(np.dot(self.coefficients, (self.forms @ x) ** self.degree))

    def eval_batch(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        return ((xs @ self.forms.T) ** self.degree) @ self.coefficients


#: Relative residual bound for accepting a decomposition.
_DECOMP_TOL = 1e-8


def decompose_homogeneous(p0: Polynomial) -> LinearFormDecomposition:
    """Write a homogeneous polynomial as a combination of powers of linear forms.

    Solves the generalized Vandermonde system over the lattice directions
    (1, lam), lam in S(n, m-1), refines the solution twice in extended
    precision, and verifies reconstruction at 100 random points; raises
    IllConditioned if the verification residual exceeds
    1e-8 * (1 + max |p0| over those points).
    """
    n = p0.degree()
    m = p0.num_vars
    if p0.is_zero() or n < 1:
        raise DomainError("decomposition needs a nonzero homogeneous polynomial of degree >= 1")
    if any(sum(mu) != n for mu in p0.terms):
        raise DomainError("polynomial is not homogeneous")

    lattice = lattice_points(n, m - 1)
    forms = np.array([(1,) + lam for lam in lattice], dtype=float)
    monos = monomials_of_degree(n, m)
    if len(monos) != len(lattice):  # pragma: no cover - combinatorial identity
        raise IllConditioned("lattice size does not match monomial count")

    size = len(monos)
    system = np.empty((size, size))
    for r, mu in enumerate(monos):
        w = float(_multinomial_full(n, mu))
        for c in range(size):
            acc = w
            for ai, e in zip(forms[c], mu):
                if e:
                    acc *= ai**e
            system[r, c] = acc
    rhs = np.array([p0.coeff(mu) for mu in monos])

    coeffs = np.linalg.solve(system, rhs)
    # two rounds of iterative refinement with an extended-precision residual
    sys_ld = system.astype(np.longdouble)
    rhs_ld = rhs.astype(np.longdouble)
    for _ in range(2):
        residual = rhs_ld - sys_ld @ coeffs.astype(np.longdouble)
        coeffs = coeffs + np.linalg.solve(system, residual.astype(float))

    deco = LinearFormDecomposition(n, coeffs, forms)
    rng = np.random.default_rng(1234)
    xs = rng.uniform(-1.0, 1.0, size=(100, m))
    truth = p0.eval_batch(xs)
    err = float(np.max(np.abs(truth - deco.eval_batch(xs))))
    bound = _DECOMP_TOL * (1.0 + float(np.max(np.abs(truth))))
    if err > bound:
        raise IllConditioned(
            f"decomposition residual {err:.3e} exceeds {bound:.3e} (n={n}, m={m})"
        )
    return deco


# ---------------------------------------------------------------------------
# plain-text format: "3*x0^2*x1 - 2*x1 + 5"
# ---------------------------------------------------------------------------

_FACTOR_RE = re.compile(r"^x(\d+)(?:\^(\d+))?$")


def parse_poly(text: str, num_vars: int | None = None) -> Polynomial:
    """Parse the plain-text polynomial format with variables x0, x1, ...."""
    src = text.strip()
    if not src:
        raise DomainError("empty polynomial text")
    # split into signed chunks; keep scientific-notation exponents intact
    pieces = re.split(r"(?<![eE*^])([+-])", " " + src)
    chunks: list[tuple[float, str]] = []
    sign = 1.0
    for piece in pieces:
        piece = piece.strip()
        if piece == "":
            continue
        if piece == "+":
            continue
        if piece == "-":
            sign = -sign
            continue
        chunks.append((sign, piece))
        sign = 1.0
    if not chunks:
        raise DomainError(f"cannot parse polynomial {text!r}")

    terms: dict[tuple[int, ...], float] = {}
    max_var = -1
    parsed = []
    for sign, chunk in chunks:
        coeff = sign
        exps: dict[int, int] = {}
        for factor in chunk.split("*"):
            factor = factor.strip()
            if not factor:
                raise DomainError(f"dangling '*' in term {chunk!r}")
            match = _FACTOR_RE.match(factor)
            if match:
                var = int(match.group(1))
                exp = int(match.group(2) or 1)
                exps[var] = exps.get(var, 0) + exp
                max_var = max(max_var, var)
            else:
                try:
                    coeff *= float(factor)
                except ValueError as exc:
                    raise DomainError(f"bad factor {factor!r} in {text!r}") from exc
        parsed.append((coeff, exps))

    m = max(max_var + 1, 1) if num_vars is None else num_vars
    for coeff, exps in parsed:
        if exps and max(exps) >= m:
            raise DimensionMismatch(f"variable x{max(exps)} out of range for {m} vars")
        mu = tuple(exps.get(i, 0) for i in range(m))
        terms[mu] = terms.get(mu, 0.0) + coeff
    return Polynomial(m, terms)


def format_poly(p: Polynomial) -> str:
    """Inverse of parse_poly (canonical ordering: degree then lexicographic)."""
    if not p.terms:
        return "0"
    items = sorted(p.terms.items(), key=lambda kv: (-sum(kv[0]), kv[0]))
    parts = []
    for mu, c in items:
        factors = []
        for i, e in enumerate(mu):
            if e == 1:
                factors.append(f"x{i}")
            elif e > 1:
                factors.append(f"x{i}^{e}")
        body = "*".join(factors)
        mag = abs(c)
        if not body:
            piece = f"{mag:g}"
        elif mag == 1.0:
            piece = body
        else:
            piece = f"{mag:g}*{body}"
        if not parts:
            parts.append(piece if c > 0 else f"-{piece}")
        else:
            parts.append(f"+ {piece}" if c > 0 else f"- {piece}")
    return " ".join(parts)
