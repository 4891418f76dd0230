"""Extended-precision substrate.

Working precision, special constants, truncated power series and
recognition of rationals from high-precision reals.  Real and complex
values are mpmath ``mpf``/``mpc`` objects evaluated at an explicit bit
precision; nothing here touches the global mpmath context permanently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Sequence

import mpmath
from mpmath import mp, mpc, mpf

DEFAULT_PRECISION = 212
MIN_PRECISION = 64
MAX_PRECISION = 256

_precision = DEFAULT_PRECISION


class PrecisionError(ValueError):
    pass


class GammaPoleError(ValueError):
    pass


class RecognitionError(ValueError):
    pass


def get_precision() -> int:
    return _precision


def set_precision(bits: int) -> None:
    """Set the engine-wide working precision in bits."""
    global _precision
    bits = int(bits)
    if not MIN_PRECISION <= bits <= MAX_PRECISION:
        raise PrecisionError(f"precision must lie in [{MIN_PRECISION}, {MAX_PRECISION}], got {bits}")
    _precision = bits


def _prec(prec: int | None) -> int:
    return _precision if prec is None else int(prec)


def to_xreal(x: Any, prec: int | None = None) -> mpf:
    with mp.workprec(_prec(prec)):
        if isinstance(x, Fraction):
            return mpf(x.numerator) / x.denominator
        return mpf(x)


def _is_nonpositive_integer(z: Any) -> bool:
    if isinstance(z, (int, Fraction)):
        return z <= 0 and Fraction(z).denominator == 1
    if isinstance(z, mpc):
        if z.imag != 0:
            return False
        z = z.real
    return z <= 0 and z == int(z)


def gamma_eval(z: Any, prec: int | None = None):
    """Gamma function at a real or complex point, raising at the poles."""
    if _is_nonpositive_integer(z):
        raise GammaPoleError(f"Gamma has a pole at {z}")
    with mp.workprec(_prec(prec) + 10):
        if isinstance(z, Fraction):
            z = mpf(z.numerator) / z.denominator
        g = mpmath.gamma(z)
    with mp.workprec(_prec(prec)):
        return +g


@lru_cache(maxsize=4096)
def _zeta_cached(n: int, prec: int) -> mpf:
    with mp.workprec(prec + 10):
        v = +mp.euler if n == 1 else mpmath.zeta(n)
    with mp.workprec(prec):
        return +v


def zeta_const(n: int, prec: int | None = None) -> mpf:
    """zeta(n) for integers n >= 2; by convention zeta(1) is Euler's constant."""
    n = int(n)
    if n < 1:
        raise ValueError("zeta_const needs n >= 1")
    return _zeta_cached(n, _prec(prec))


def agm(a: Any, b: Any, prec: int | None = None) -> mpf:
    """Arithmetic-geometric mean of two positive reals."""
    with mp.workprec(_prec(prec) + 10):
        a, b = mpf(a), mpf(b)
        if a <= 0 or b <= 0:
            raise ValueError("agm needs positive arguments")
        r = mpmath.agm(a, b)
    with mp.workprec(_prec(prec)):
        return +r


@lru_cache(maxsize=None)
def harmonic_H(k: int, n: int) -> Fraction:
    """Complete homogeneous symmetric polynomial of degree n in 1, 1/2, ..., 1/k.

    Computed from H_k(0) = 1, H_0(n) = 0 (n > 0) and
    H_k(n) = H_{k-1}(n) + H_k(n-1)/k.
    """
    if n < 0 or k < 0:
        raise ValueError("harmonic_H needs k, n >= 0")
    if n == 0:
        return Fraction(1)
    if k == 0:
        return Fraction(0)
    return harmonic_H(k - 1, n) + harmonic_H(k, n - 1) / k


@dataclass(frozen=True)
class TruncatedSeries:
    """Laurent series sum_{n >= valuation} c_n w^n known modulo w^(valuation + len(coeffs)).

    ``w`` is the local variable z - center.  Coefficients may be any field
    elements (mpf, Fraction, int); arithmetic never mixes truncation orders
    incorrectly: a product is known to min(len) terms past its leading exponent.
    """

    coeffs: tuple
    valuation: int = 0
    center: Any = 0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(self.coeffs))

    @property
    def pole_order(self) -> int:
        return max(0, -self.valuation)

    @property
    def order(self) -> int:
        """Exponent of the first unknown term."""
        return self.valuation + len(self.coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    def coefficient(self, n: int):
        if n >= self.order:
            raise IndexError(f"coefficient of w^{n} lies beyond the truncation order {self.order}")
        if n < self.valuation:
            return 0 * self.coeffs[0] if self.coeffs else 0
        return self.coeffs[n - self.valuation]

    def residue(self):
        return self.coefficient(-1)

    def truncate(self, order: int) -> "TruncatedSeries":
        keep = max(0, min(len(self.coeffs), order - self.valuation))
        return TruncatedSeries(self.coeffs[:keep], self.valuation, self.center)

    def _check(self, other: "TruncatedSeries") -> None:
        if self.center != other.center:
            raise ValueError("series expanded about different centers")

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            if self.order <= 0:
                return self
            other = TruncatedSeries((other,) + (0 * other,) * (self.order - 1), 0, self.center)
        self._check(other)
        lo = min(self.valuation, other.valuation)
        hi = min(self.order, other.order)
        out = []
        for n in range(lo, hi):
            a = self.coeffs[n - self.valuation] if n >= self.valuation else 0
            b = other.coeffs[n - other.valuation] if n >= other.valuation else 0
            out.append(a + b)
        return TruncatedSeries(out, lo, self.center)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs], self.valuation, self.center)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TruncatedSeries):
            return TruncatedSeries([c * other for c in self.coeffs], self.valuation, self.center)
        self._check(other)
        t = min(len(self.coeffs), len(other.coeffs))
        a, b = self.coeffs, other.coeffs
        out = []
        for n in range(t):
            s = a[0] * b[n]
            for i in range(1, n + 1):
                s = s + a[i] * b[n - i]
            out.append(s)
        return TruncatedSeries(out, self.valuation + other.valuation, self.center)

    __rmul__ = __mul__

    def inverse(self) -> "TruncatedSeries":
        if not self.coeffs or self.coeffs[0] == 0:
            raise ZeroDivisionError("leading coefficient must be nonzero to invert")
        a = self.coeffs
        inv0 = 1 / a[0]
        out = [inv0]
        for n in range(1, len(a)):
            s = a[1] * out[n - 1]
            for i in range(2, n + 1):
                s = s + a[i] * out[n - i]
            out.append(-s * inv0)
        return TruncatedSeries(out, -self.valuation, self.center)

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return self * other.inverse()
        return TruncatedSeries([c / other for c in self.coeffs], self.valuation, self.center)

    def normalized(self) -> "TruncatedSeries":
        """Drop exactly-zero leading coefficients."""
        c = list(self.coeffs)
        v = self.valuation
        while c and c[0] == 0:
            c.pop(0)
            v += 1
        return TruncatedSeries(c, v, self.center)

    def scale_variable(self, alpha) -> "TruncatedSeries":
        """Series of f(alpha * w)."""
        out = []
        p = alpha ** self.valuation if self.valuation >= 0 else 1 / alpha ** (-self.valuation)
        for c in self.coeffs:
            out.append(c * p)
            p = p * alpha
        return TruncatedSeries(out, self.valuation, self.center)

    def exp(self) -> "TruncatedSeries":
        """exp of a series with zero constant term (valuation >= 1 after normalising)."""
        if self.valuation < 0 or (self.valuation == 0 and self.coeffs and self.coeffs[0] != 0):
            raise ValueError("exp needs a series vanishing at the center")
        order = self.order
        f = [0] * order
        for n in range(max(self.valuation, 0), order):
            f[n] = self.coeffs[n - self.valuation]
        one = 1 + 0 * self.coeffs[0] if self.coeffs else 1
        e = [one] + [0] * (order - 1)
        # e' = f' e, so n e_n = sum_{k=1}^{n} k f_k e_{n-k}
        for n in range(1, order):
            s = 0 * one
            for k in range(1, n + 1):
                if f[k] != 0:
                    s = s + k * f[k] * e[n - k]
            e[n] = s / n
        return TruncatedSeries(e, 0, self.center)


def series_exp_linear(a, length: int, center=0) -> TruncatedSeries:
    """exp(a w) to ``length`` terms."""
    out = []
    term = 1 + 0 * a
    for n in range(length):
        out.append(term)
        term = term * a / (n + 1)
    return TruncatedSeries(out, 0, center)


# ---------------------------------------------------------------- recognition

_SMALL_PRIMES: list[int] | None = None


def small_primes(bound: int = 10**6) -> list[int]:
    global _SMALL_PRIMES
    if _SMALL_PRIMES is None or _SMALL_PRIMES[-1] < bound - 1000:
        import numpy as np

        sieve = np.ones(bound, dtype=bool)
        sieve[:2] = False
        for p in range(2, int(bound**0.5) + 1):
            if sieve[p]:
                sieve[p * p :: p] = False
        _SMALL_PRIMES = [int(p) for p in np.nonzero(sieve)[0]]
    return _SMALL_PRIMES


def factor_small(n: int, bound: int = 10**6) -> tuple[dict[int, int], int]:
    """Factor |n| over primes below ``bound``; returns (exponents, cofactor)."""
    n = abs(int(n))
    fac: dict[int, int] = {}
    if n == 0:
        return fac, 0
    for p in small_primes(bound):
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            fac[p] = e
    if 1 < n < bound:
        fac[n] = fac.get(n, 0) + 1
        n = 1
    return fac, n


def format_factorization(value: Fraction) -> str:
    """Render a rational as e.g. ``2^4*5`` or ``-2^17/3``."""
    value = Fraction(value)
    if value == 0:
        return "0"

    def part(n: int) -> str:
        fac, cof = factor_small(n)
        bits = [f"{p}^{e}" if e > 1 else str(p) for p, e in sorted(fac.items())]
        if cof != 1:
            bits.append(str(cof))
        return "*".join(bits) if bits else "1"

    s = "-" if value < 0 else ""
    s += part(value.numerator)
    if value.denominator != 1:
        s += "/" + part(value.denominator)
    return s


@dataclass(frozen=True)
class RecognizedRational:
    value: Fraction
    unit: complex | int
    residual: Any
    numerator_factors: dict = field(default_factory=dict)
    denominator_factors: dict = field(default_factory=dict)
    cofactor: tuple = (1, 1)

    def __str__(self) -> str:
        return format_factorization(self.value)


def _continued_fraction_match(x: mpf, max_den: int, tol: mpf) -> Fraction | None:
    """First continued-fraction convergent p/q with q <= max_den and |x - p/q| <= tol."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    y = x
    for _ in range(400):
        a = int(mpmath.floor(y))
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > max_den:
            return None
        if abs(x - mpf(h1) / k1) <= tol:
            return Fraction(h1, k1)
        frac = y - a
        if frac == 0:
            return None
        y = 1 / frac
    return None


def rational_recognize(x, max_den: int = 10**4, unit_slack: bool = False, prec: int | None = None) -> RecognizedRational:
    """Identify x (possibly times a unit in {1, -1, i, -i}) as a rational p/q.

    The match threshold is 2^(-P/2) relative to max(1, |x|).  With
    ``unit_slack`` a complex x is rotated by each unit in turn and the first
    rotation whose imaginary part vanishes within the threshold is used.
    """
    P = _prec(prec)
    with mp.workprec(P + 20):
        z = mpmath.mpmathify(x)
        scale = max(mpf(1), abs(z))
        tol = mpf(2) ** (-(P // 2)) * scale
        units: Sequence = (1, -1, 1j, -1j) if unit_slack else (1,)
        for u in units:
            w = z * (mpc(u) if isinstance(u, complex) else u)
            if isinstance(w, mpc):
                if abs(w.imag) > tol:
                    continue
                w = w.real
            if unit_slack and w < -tol:
                continue
            if abs(w) <= tol:
                return RecognizedRational(Fraction(0), u if unit_slack else 1, abs(w))
            neg = w < 0
            r = _continued_fraction_match(abs(w), max_den, tol)
            if r is None:
                continue
            if neg:
                r = -r
            nf, nc = factor_small(r.numerator)
            df, dc = factor_small(r.denominator)
            return RecognizedRational(r, u, abs(w - mpf(r.numerator) / r.denominator), nf, df, (nc, dc))
    raise RecognitionError(f"no rational with denominator <= {max_den} within 2^-{P // 2} of {mpmath.nstr(z, 20)}")


def log2_abs(x) -> float:
    """log2|x| as a float, -inf for zero."""
    if x == 0:
        return -math.inf
    return float(mpmath.log(abs(mpmath.mpmathify(x)), 2))
