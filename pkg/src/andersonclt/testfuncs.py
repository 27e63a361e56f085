"""Test functions: polynomials, smooth functions with growth certificates,
and constructive polynomial approximation (Bernstein, Chebyshev).

Polynomials store dense ascending coefficients.  Coefficients stay exact
(`fractions.Fraction`) whenever they were produced by exact constructions;
evaluation is Horner's scheme everywhere, which is exact on rational inputs
and the single canonical float evaluator otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

__all__ = [
    "Polynomial",
    "SmoothFunction",
    "bernstein_approx",
    "chebyshev_approx",
    "catalog",
    "function_of",
    "derivative_of",
    "label_of",
]


def _trim(coeffs) -> tuple:
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return tuple(coeffs)


@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial, coefficients in ascending degree."""

    coefficients: tuple = (0,)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _trim(self.coefficients))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, x):
        """Horner evaluation; exact on Fraction/int inputs, float otherwise."""
        if isinstance(x, np.ndarray):
            coeffs = [float(c) for c in self.coefficients]
            out = np.full_like(x, coeffs[-1], dtype=np.float64)
            for c in reversed(coeffs[:-1]):
                out = out * x + c
            return out
        acc = self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial((0,))
        return Polynomial(
            tuple(k * c for k, c in enumerate(self.coefficients) if k >= 1)
        )

    def antiderivative(self) -> "Polynomial":
        """Primitive with constant term fixed to 0."""
        out = [0]
        for k, c in enumerate(self.coefficients):
            out.append(c * Fraction(1, k + 1) if _is_exact(c) else c / (k + 1))
        return Polynomial(tuple(out))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        a, b = self.coefficients, other.coefficients
        n = max(len(a), len(b))
        return Polynomial(
            tuple(
                (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
                for i in range(n)
            )
        )

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + other.scale(-1)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out = [0] * (len(self.coefficients) + len(other.coefficients) - 1)
        for i, a in enumerate(self.coefficients):
            for j, b in enumerate(other.coefficients):
                out[i + j] += a * b
        return Polynomial(tuple(out))

    def scale(self, alpha) -> "Polynomial":
        return Polynomial(tuple(alpha * c for c in self.coefficients))

    def shift(self, c) -> "Polynomial":
        """Add the constant c."""
        coeffs = list(self.coefficients)
        coeffs[0] = coeffs[0] + c
        return Polynomial(tuple(coeffs))

    def without_constant(self) -> "Polynomial":
        coeffs = list(self.coefficients)
        coeffs[0] = 0
        return Polynomial(tuple(coeffs))

    def compose_affine(self, a, b) -> "Polynomial":
        """Coefficients of p(a*x + b)."""
        acc = Polynomial((self.coefficients[-1],))
        inner = Polynomial((b, a))
        for c in reversed(self.coefficients[:-1]):
            acc = acc * inner
            acc = acc.shift(c)
        return acc

    def as_floats(self) -> "Polynomial":
        return Polynomial(tuple(float(c) for c in self.coefficients))

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(c) for c in self.coefficients)


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction))


@dataclass(frozen=True)
class SmoothFunction:
    """Continuously differentiable test function with a growth certificate.

    ``growth`` is a polynomial dominating |derivative| on the declared
    validity interval (None means everywhere the suite ever evaluates it).
    """

    label: str
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    growth: Polynomial
    monotone: bool = False
    interval: tuple[float, float] | None = None


def function_of(tf):
    """Callable view of a Polynomial or SmoothFunction."""
    if isinstance(tf, Polynomial):
        return tf
    if isinstance(tf, SmoothFunction):
        return tf.f
    if callable(tf):
        return tf
    raise TypeError(f"not a test function: {tf!r}")


def derivative_of(tf):
    """Derivative callable of a Polynomial or SmoothFunction."""
    if isinstance(tf, Polynomial):
        return tf.derivative()
    if isinstance(tf, SmoothFunction):
        return tf.fprime
    raise TypeError(f"no derivative available for {tf!r}")


def label_of(tf) -> str:
    if isinstance(tf, Polynomial):
        return "poly[" + ",".join(str(c) for c in tf.coefficients) + "]"
    if isinstance(tf, SmoothFunction):
        return tf.label
    return getattr(tf, "__name__", repr(tf))


def bernstein_approx(g, interval: tuple, k: int) -> Polynomial:
    """Degree-k Bernstein polynomial of ``g`` rescaled from [0,1] to ``interval``.

    The basis expansion and the affine rescaling are carried out in exact
    rational arithmetic over the (binary-exact) sampled values, so the
    returned coefficients are free of conversion error.
    """
    if k < 1:
        raise ValueError(f"Bernstein degree must be >= 1, got {k}")
    lo, hi = Fraction(interval[0]), Fraction(interval[1])
    if not lo < hi:
        raise ValueError("interval must have positive length")
    width = hi - lo
    if isinstance(g, Polynomial) and g.is_exact:
        samples = [g(lo + width * Fraction(j, k)) for j in range(k + 1)]
    else:
        samples = [Fraction(float(g(float(lo + width * j / k)))) for j in range(k + 1)]

    # B(t) = sum_j g(x_j) C(k,j) t^j (1-t)^(k-j), expanded in powers of t
    coeffs_t = [Fraction(0)] * (k + 1)
    for j, gj in enumerate(samples):
        base = gj * math.comb(k, j)
        for m in range(k - j + 1):
            coeffs_t[j + m] += base * math.comb(k - j, m) * (-1) ** m
    in_t = Polynomial(tuple(coeffs_t))
    # substitute t = (x - lo) / width
    return in_t.compose_affine(Fraction(1) / width, -lo / width)


def chebyshev_approx(g, interval: tuple, k: int) -> Polynomial:
    """Degree-k Chebyshev interpolant on ``interval`` in power-basis form.

    Reproduces polynomials of degree <= k up to rounding; offered as the
    alternative constructive scheme behind the same interface as
    ``bernstein_approx``.
    """
    if k < 1:
        raise ValueError(f"Chebyshev degree must be >= 1, got {k}")
    cheb = np.polynomial.chebyshev.Chebyshev.interpolate(
        lambda x: np.asarray(g(x), dtype=np.float64), k, domain=list(interval)
    )
    power = cheb.convert(kind=np.polynomial.Polynomial)
    return Polynomial(tuple(float(c) for c in power.coef))


def catalog() -> dict[str, SmoothFunction]:
    """Named library of smooth test functions."""
    return {
        "arctan": SmoothFunction(
            label="arctan",
            f=np.arctan,
            fprime=lambda x: 1.0 / (1.0 + np.square(x)),
            growth=Polynomial((1,)),
            monotone=True,
        ),
        "tanh": SmoothFunction(
            label="tanh",
            f=np.tanh,
            fprime=lambda x: 1.0 / np.square(np.cosh(x)),
            growth=Polynomial((1,)),
            monotone=True,
        ),
        "cubic": SmoothFunction(
            label="cubic",
            f=lambda x: np.power(x, 3),
            fprime=lambda x: 3.0 * np.square(x),
            growth=Polynomial((1, 0, 3)),
            monotone=True,
        ),
        "logistic": SmoothFunction(
            label="logistic",
            f=_logistic,
            fprime=lambda x: _logistic(x) * (1.0 - _logistic(x)),
            growth=Polynomial((1,)),
            monotone=True,
        ),
    }


def _logistic(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def check_smooth_function(
    sf: SmoothFunction,
    interval: tuple[float, float] | None = None,
    n: int = 1000,
    h: float = 1e-4,
) -> dict:
    """Grid validation of a smooth function's certificates.

    Returns the worst growth-bound slack and the worst relative mismatch
    between the central difference of f and the declared derivative.
    """
    if interval is None:
        interval = sf.interval if sf.interval is not None else (-10.0, 10.0)
    grid = np.linspace(interval[0], interval[1], n)
    fp = np.asarray(sf.fprime(grid), dtype=np.float64)
    bound = sf.growth(grid)
    growth_slack = float(np.max(np.abs(fp) - bound))
    central = (np.asarray(sf.f(grid + h)) - np.asarray(sf.f(grid - h))) / (2 * h)
    deriv_err = float(np.max(np.abs(central - fp) / (1.0 + np.abs(fp))))
    return {"growth_slack": growth_slack, "derivative_error": deriv_err}
