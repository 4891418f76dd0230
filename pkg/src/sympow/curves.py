"""Elliptic curves over Q: models, invariants, minimality, reduction types,
point counts, quadratic twists, CM detection and periods."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path

import mpmath
import numpy as np
from mpmath import mp, mpc, mpf

from .numerics import agm, factor_small, get_precision


class CurveError(ValueError):
    pass


class SingularCurveError(CurveError):
    pass


class CMCurveError(CurveError):
    pass


class BadPrimeError(CurveError):
    pass


def valuation(n: int, p: int) -> int:
    if n == 0:
        return 10**9
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


def factor(n: int) -> dict[int, int]:
    """Full factorisation of |n| (n != 0)."""
    fac, cof = factor_small(n)
    if cof > 1:
        import sympy

        for q, e in sympy.factorint(cof).items():
            fac[int(q)] = fac.get(int(q), 0) + e
    return dict(sorted(fac.items()))


@dataclass(frozen=True)
class WeierstrassModel:
    """y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6 with integer coefficients."""

    a1: int
    a2: int
    a3: int
    a4: int
    a6: int

    def __post_init__(self):
        if self.disc == 0:
            raise SingularCurveError(f"singular model {self.ainvs}")

    @property
    def ainvs(self) -> tuple[int, int, int, int, int]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def b2(self) -> int:
        return self.a1 * self.a1 + 4 * self.a2

    @property
    def b4(self) -> int:
        return self.a1 * self.a3 + 2 * self.a4

    @property
    def b6(self) -> int:
        return self.a3 * self.a3 + 4 * self.a6

    @property
    def b8(self) -> int:
        a1, a2, a3, a4, a6 = self.ainvs
        return a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4

    @property
    def c4(self) -> int:
        return self.b2 * self.b2 - 24 * self.b4

    @property
    def c6(self) -> int:
        return -self.b2**3 + 36 * self.b2 * self.b4 - 216 * self.b6

    @property
    def disc(self) -> int:
        b2, b4, b6, b8 = self.b2, self.b4, self.b6, self.b8
        return -b2 * b2 * b8 - 8 * b4**3 - 27 * b6 * b6 + 9 * b2 * b4 * b6

    @property
    def j(self) -> Fraction:
        return Fraction(self.c4**3, self.disc)

    def rst(self, r: int, s: int, t: int) -> "WeierstrassModel":
        """Model after x -> x + r, y -> y + s x + t."""
        a1, a2, a3, a4, a6 = self.ainvs
        return WeierstrassModel(
            a1 + 2 * s,
            a2 - s * a1 + 3 * r - s * s,
            a3 + r * a1 + 2 * t,
            a4 - s * a3 + 2 * r * a2 - (t + r * s) * a1 + 3 * r * r - 2 * s * t,
            a6 + r * a4 + r * r * a2 + r**3 - t * a3 - t * t - r * t * a1,
        )

    def scale(self, u: int) -> "WeierstrassModel":
        """Divide a_i by u^i (caller guarantees integrality)."""
        a = self.ainvs
        w = (1, 2, 3, 4, 6)
        out = []
        for ai, wi in zip(a, w):
            q, rem = divmod(ai, u**wi)
            if rem:
                raise CurveError(f"model not divisible by u={u}")
            out.append(q)
        return WeierstrassModel(*out)

    def __str__(self) -> str:
        return "[" + ",".join(str(a) for a in self.ainvs) + "]"


def model_from_c4c6(c4: int, c6: int) -> WeierstrassModel:
    """Reduced integral model (a1, a3 in {0,1}, a2 in {-1,0,1}) with given c4, c6."""
    b2 = (-c6) % 12
    if b2 > 6:
        b2 -= 12
    b4, r4 = divmod(b2 * b2 - c4, 24)
    b6, r6 = divmod(-(b2**3) + 36 * b2 * b4 - c6, 216)
    if r4 or r6:
        raise CurveError(f"no integral model with c4={c4}, c6={c6}")
    a1 = b2 % 2
    a3 = b6 % 2
    a2 = (b2 - a1) // 4
    a4, r = divmod(b4 - a1 * a3, 2)
    a6, r2 = divmod(b6 - a3, 4)
    if r or r2 or (b2 - a1) % 4:
        raise CurveError(f"no integral model with c4={c4}, c6={c6}")
    model = WeierstrassModel(a1, a2, a3, a4, a6)
    if model.c4 != c4 or model.c6 != c6:
        raise CurveError(f"no integral model with c4={c4}, c6={c6}")
    return model


# ------------------------------------------------------------- finite fields


def _legendre(a: int, p: int) -> int:
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def _count_quad_roots(a: int, b: int, c: int, p: int) -> int:
    """Number of roots of a x^2 + b x + c in F_p (a may vanish)."""
    a, b, c = a % p, b % p, c % p
    if p < 50:
        return sum(1 for x in range(p) if (a * x * x + b * x + c) % p == 0)
    if a == 0:
        if b == 0:
            return p if c == 0 else 0
        return 1
    d = _legendre(b * b - 4 * a * c, p)
    return d + 1


def _poly_mulmod(f: list[int], g: list[int], m: list[int], p: int) -> list[int]:
    prod = [0] * (len(f) + len(g) - 1)
    for i, fi in enumerate(f):
        if fi:
            for j, gj in enumerate(g):
                prod[i + j] = (prod[i + j] + fi * gj) % p
    return _poly_rem(prod, m, p)


def _poly_rem(f: list[int], m: list[int], p: int) -> list[int]:
    # coefficient lists, lowest degree first, m monic
    f = f[:]
    dm = len(m) - 1
    while len(f) - 1 >= dm and any(f):
        if f[-1] == 0:
            f.pop()
            continue
        c = f[-1]
        shift = len(f) - 1 - dm
        for i in range(dm + 1):
            f[shift + i] = (f[shift + i] - c * m[i]) % p
        f.pop()
    while f and f[-1] == 0:
        f.pop()
    return f or [0]


def _poly_gcd_degree(f: list[int], g: list[int], p: int) -> int:
    def trim(h):
        h = [x % p for x in h]
        while h and h[-1] == 0:
            h.pop()
        return h

    f, g = trim(f), trim(g)
    while g:
        inv = pow(g[-1], -1, p)
        g = [(x * inv) % p for x in g]
        f, g = g, trim(_poly_rem(f, g, p))
    return len(f) - 1


def _count_cubic_roots(b: int, c: int, d: int, p: int) -> int:
    """Number of distinct roots of x^3 + b x^2 + c x + d in F_p."""
    if p < 5000:
        xs = np.arange(p, dtype=np.int64)
        v = (((xs * xs) % p * xs) % p + b % p * ((xs * xs) % p) + c % p * xs + d % p) % p
        return int(np.count_nonzero(v == 0))
    f = [d % p, c % p, b % p, 1]
    # x^p mod f by square and multiply
    result = [1]
    base = [0, 1]
    e = p
    while e:
        if e & 1:
            result = _poly_mulmod(result, base, f, p)
        base = _poly_mulmod(base, base, f, p)
        e >>= 1
    xp = result + [0] * (3 - len(result))
    xp[1] = (xp[1] - 1) % p
    return _poly_gcd_degree(f, xp, p)


# ------------------------------------------------------------ Tate algorithm


class ReductionType(enum.Enum):
    GOOD = "good"
    SPLIT = "split multiplicative"
    NONSPLIT = "nonsplit multiplicative"
    ADDITIVE = "additive"


@dataclass(frozen=True)
class LocalReduction:
    p: int
    kind: ReductionType
    kodaira: str
    conductor_exponent: int
    tamagawa: int
    disc_valuation: int  # of a p-minimal model
    potentially_multiplicative: bool

    @property
    def is_multiplicative(self) -> bool:
        return self.kind in (ReductionType.SPLIT, ReductionType.NONSPLIT)


def _tate(model: WeierstrassModel, p: int) -> tuple[LocalReduction, int]:
    """Tate's algorithm at p; returns the local data and the power of p by
    which the model had to be rescaled to become minimal at p."""
    E = model
    shrink = 0

    def inv(x: int, mod: int) -> int:
        return pow(x % mod, -1, mod)

    while True:
        D = E.disc
        vD = valuation(D, p)
        vj_neg = valuation(E.c4, p) * 3 < vD
        if vD == 0:
            return LocalReduction(p, ReductionType.GOOD, "I0", 0, 1, 0, False), shrink
        a1, a2, a3, a4, a6 = E.ainvs
        b2, b4, b6 = E.b2, E.b4, E.b6
        c4, c6 = E.c4, E.c6
        # move the singular point of the reduction to (0, 0)
        if p == 2:
            if b2 % 2 == 0:
                r = a4 % 2
                t = (r * (1 + a2 + a4) + a6) % 2
            else:
                r = a3 % 2
                t = (r + a4) % 2
        elif p == 3:
            r = (-b6) % 3 if b2 % 3 == 0 else (-b2 * b4) % 3
            t = (a1 * r + a3) % 3
        else:
            if c4 % p == 0:
                r = (-inv(12, p) * b2) % p
            else:
                r = (-inv(12 * c4, p) * (c6 + b2 * c4)) % p
            t = (-inv(2, p) * (a1 * r + a3)) % p
        E = E.rst(r, 0, t)
        a1, a2, a3, a4, a6 = E.ainvs
        if a3 % p or a4 % p or a6 % p:
            raise CurveError(f"failed to locate the singular point mod {p}")
        if c4 % p:
            split = _count_quad_roots(1, a1, -a2, p) > 0
            kind = ReductionType.SPLIT if split else ReductionType.NONSPLIT
            c = vD if split else (2 if vD % 2 == 0 else 1)
            return LocalReduction(p, kind, f"I{vD}", 1, c, vD, True), shrink
        if a6 % (p * p):
            return LocalReduction(p, ReductionType.ADDITIVE, "II", vD, 1, vD, vj_neg), shrink
        if E.b8 % p**3:
            return LocalReduction(p, ReductionType.ADDITIVE, "III", vD - 1, 2, vD, vj_neg), shrink
        if E.b6 % p**3:
            c = 3 if _count_quad_roots(1, 0, -(E.b6 // (p * p)), p) > 0 else 1
            return LocalReduction(p, ReductionType.ADDITIVE, "IV", vD - 2, c, vD, vj_neg), shrink
        # now arrange p | a1, a2; p^2 | a3, a4; p^3 | a6
        if p == 2:
            s = a2 % 2
            t = 2 * ((a6 // 4) % 2)
        else:
            s = (-a1 * inv(2, p)) % p
            t = (-a3 * inv(2, p**3)) % p**3
        E = E.rst(0, s, t)
        a1, a2, a3, a4, a6 = E.ainvs
        if a1 % p or a2 % p or a3 % (p * p) or a4 % (p * p) or a6 % p**3:
            raise CurveError(f"Tate step 6 failed at p={p}")
        b, c, d = a2 // p, a4 // (p * p), a6 // p**3
        w = 27 * d * d - b * b * c * c + 4 * b**3 * d - 18 * b * c * d + 4 * c**3
        x = 3 * c - b * b
        if w % p:
            nroots = _count_cubic_roots(b, c, d, p)
            return LocalReduction(p, ReductionType.ADDITIVE, "I0*", vD - 4, 1 + nroots, vD, vj_neg), shrink
        if x % p:
            # double root: move it to 0, then peel off the I_n^* levels
            if p == 2:
                r0 = c % 2
            elif p == 3:
                r0 = (b * c) % 3
            else:
                r0 = ((b * c - 9 * d) * inv(2 * x, p)) % p
            E = E.rst(p * r0, 0, 0)
            n = 1
            while True:
                a1, a2, a3, a4, a6 = E.ainvs
                j = (n + 1) // 2
                if n % 2:
                    A, B = a3 // p ** (j + 1), a6 // p ** (2 * j + 2)
                    if (A * A + 4 * B) % p:
                        c = 4 if _count_quad_roots(1, A, -B, p) > 0 else 2
                        break
                    y0 = B % 2 if p == 2 else (-A * inv(2, p)) % p
                    E = E.rst(0, 0, p ** (j + 1) * y0)
                else:
                    j = n // 2
                    qa, qb, qc = a2 // p, a4 // p ** (j + 2), a6 // p ** (2 * j + 3)
                    if (qb * qb - 4 * qa * qc) % p:
                        c = 4 if _count_quad_roots(qa, qb, qc, p) > 0 else 2
                        break
                    x0 = qc % 2 if p == 2 else (-qb * inv(2 * qa, p)) % p
                    E = E.rst(p ** (j + 1) * x0, 0, 0)
                n += 1
            return LocalReduction(p, ReductionType.ADDITIVE, f"I{n}*", vD - 4 - n, c, vD, vj_neg), shrink
        # triple root
        if p == 2:
            r0 = b % 2
        elif p == 3:
            r0 = (-d) % 3
        else:
            r0 = (-b * inv(3, p)) % p
        E = E.rst(p * r0, 0, 0)
        a1, a2, a3, a4, a6 = E.ainvs
        if a2 % (p * p) or a4 % p**3 or a6 % p**4:
            raise CurveError(f"Tate triple-root step failed at p={p}")
        x3, x6 = a3 // (p * p), a6 // p**4
        if (x3 * x3 + 4 * x6) % p:
            c = 3 if _count_quad_roots(1, x3, -x6, p) > 0 else 1
            return LocalReduction(p, ReductionType.ADDITIVE, "IV*", vD - 6, c, vD, vj_neg), shrink
        y0 = x6 % 2 if p == 2 else (-x3 * inv(2, p)) % p
        E = E.rst(0, 0, p * p * y0)
        a1, a2, a3, a4, a6 = E.ainvs
        if a4 % p**4:
            return LocalReduction(p, ReductionType.ADDITIVE, "III*", vD - 7, 2, vD, vj_neg), shrink
        if a6 % p**6:
            return LocalReduction(p, ReductionType.ADDITIVE, "II*", vD - 8, 1, vD, vj_neg), shrink
        E = E.scale(p)
        shrink += 1


def local_reduction(model: WeierstrassModel, p: int) -> LocalReduction:
    return _tate(model, p)[0]


def minimal_model(model: WeierstrassModel) -> WeierstrassModel:
    """Global reduced minimal model."""
    u = 1
    c4, c6 = model.c4, model.c6
    for p in factor(model.disc):
        if valuation(model.disc, p) >= 12:
            u *= p ** _tate(model, p)[1]
    return model_from_c4c6(c4 // u**4, c6 // u**6)


def reduction_type(model: WeierstrassModel, p: int) -> ReductionType:
    return local_reduction(minimal_model(model), p).kind


# ----------------------------------------------------------- point counting


def ap_good(model: WeierstrassModel, p: int) -> int:
    """Trace of Frobenius p + 1 - #E(F_p) by direct counting (p of good reduction)."""
    if model.disc % p == 0:
        raise BadPrimeError(f"{p} divides the discriminant")
    if p == 2:
        a1, a2, a3, a4, a6 = model.ainvs
        count = 1
        for x in range(2):
            for y in range(2):
                if (y * y + a1 * x * y + a3 * y - x**3 - a2 * x * x - a4 * x - a6) % 2 == 0:
                    count += 1
        return p + 1 - count
    xs = np.arange(p, dtype=np.int64)
    b2, b4, b6 = model.b2 % p, (2 * model.b4) % p, model.b6 % p
    f = ((((4 * xs + b2) % p) * xs % p + b4) % p * xs % p + b6) % p
    squares = np.zeros(p, dtype=bool)
    squares[(xs * xs) % p] = True
    chi = np.where(f == 0, 0, np.where(squares[f], 1, -1))
    return -int(chi.sum())


# ------------------------------------------------------------------ twists

_CM_J = {
    Fraction(0): -3,
    Fraction(1728): -4,
    Fraction(-3375): -7,
    Fraction(8000): -8,
    Fraction(54000): -12,
    Fraction(287496): -16,
    Fraction(-32768): -11,
    Fraction(16581375): -28,
    Fraction(-884736): -19,
    Fraction(-12288000): -27,
    Fraction(-884736000): -43,
    Fraction(-147197952000): -67,
    Fraction(-262537412640768000): -163,
}


def cm_discriminant(model: WeierstrassModel) -> int | None:
    """Discriminant of the CM order, or None when the curve has no CM."""
    return _CM_J.get(model.j)


def squarefree_part(d: int) -> int:
    if d == 0:
        raise ValueError("twist parameter must be nonzero")
    sign = -1 if d < 0 else 1
    out = 1
    for p, e in factor(d).items():
        if e % 2:
            out *= p
    return sign * out


def quadratic_twist(model: WeierstrassModel, d: int) -> WeierstrassModel:
    """Minimal model of the quadratic twist by Q(sqrt d)."""
    d = squarefree_part(d)
    c4, c6 = d * d * model.c4, d**3 * model.c6
    return minimal_model(WeierstrassModel(0, 0, 0, -27 * c4, -54 * c6))


def minimal_twist_at(model: WeierstrassModel, p: int) -> tuple[WeierstrassModel, int]:
    """Twist by 1, -3 (p=3) or 1, -1, 2, -2 (p=2) minimising the local
    conductor exponent, ties broken by the minimal discriminant valuation."""
    if p == 3:
        cands = (1, -3)
    elif p == 2:
        cands = (1, -1, 2, -2)
    else:
        raise ValueError("minimal_twist_at is defined for p = 2, 3")
    best = None
    for d in cands:
        F = minimal_model(model) if d == 1 else quadratic_twist(model, d)
        loc = local_reduction(F, p)
        key = (loc.conductor_exponent, loc.disc_valuation)
        if best is None or key < best[0]:
            best = (key, F)
    return best[1], best[0][0]


# ----------------------------------------------------------------- periods


@dataclass(frozen=True)
class Periods:
    omega_plus: mpf
    omega_minus: mpc


def periods(model: WeierstrassModel, prec: int | None = None) -> Periods:
    """Least positive real period and the imaginary period i*covolume/omega_plus."""
    P = get_precision() if prec is None else prec
    with mp.workprec(P + 30):
        b2, b4, b6 = model.b2, model.b4, model.b6
        roots = mpmath.polyroots([4, b2, 2 * b4, b6], maxsteps=200, extraprec=2 * P)
        if model.disc > 0:
            e1, e2, e3 = sorted((mpf(mpmath.re(r)) for r in roots), reverse=True)
            op = mp.pi / agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e1 - e2), P + 30)
            im2 = mp.pi / agm(mpmath.sqrt(e1 - e3), mpmath.sqrt(e2 - e3), P + 30)
        else:
            e1 = mpf(mpmath.re(min(roots, key=lambda r: abs(mpmath.im(r)))))
            alpha = 3 * e1 + mpf(b2) / 4
            beta = mpmath.sqrt(3 * e1 * e1 + mpf(b2) * e1 / 2 + mpf(b4) / 2)
            a = 2 * mpmath.sqrt(beta)
            op = 2 * mp.pi / agm(a, mpmath.sqrt(2 * beta + alpha), P + 30)
            # second generator is -op/2 + i*im2
            im2 = mp.pi / agm(a, mpmath.sqrt(2 * beta - alpha), P + 30)
        covol = op * im2
        om = mpc(0, covol / op)
    with mp.workprec(P):
        return Periods(+op, +om)


def real_period_by_integration(model: WeierstrassModel, prec: int = 60) -> mpf:
    """Least real period by direct quadrature of dx/(2y + a1 x + a3).

    Independent of the AGM route; used as an oracle.
    """
    with mp.workprec(prec + 20):
        b2, b4, b6 = model.b2, model.b4, model.b6
        roots = mpmath.polyroots([4, b2, 2 * b4, b6], extraprec=200)
        e1 = max(mpf(mpmath.re(r)) for r in roots if abs(mpmath.im(r)) < mpf(10) ** -20)
        # 4x^3 + b2 x^2 + 2 b4 x + b6 = (x - e1) q(x); substitute x = e1 + t^2
        q1 = b2 + 4 * e1
        q0 = 2 * b4 + e1 * q1
        q = lambda x: 4 * x * x + q1 * x + q0
        g = lambda t: 4 / mpmath.sqrt(q(e1 + t * t))
        return mpmath.quad(g, [0, 1, 10, mpmath.inf])


# -------------------------------------------------------------- curve object


@dataclass
class EllipticCurve:
    """A non-CM elliptic curve over Q in reduced minimal form."""

    model: WeierstrassModel
    label: str | None = None
    rank: int | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def from_ainvs(cls, ainvs, label: str | None = None, rank: int | None = None, allow_cm: bool = False) -> "EllipticCurve":
        model = minimal_model(WeierstrassModel(*[int(a) for a in ainvs]))
        if not allow_cm and cm_discriminant(model) is not None:
            raise CMCurveError(f"curve {model} has complex multiplication (j = {model.j}); CM curves are not supported")
        return cls(model, label, rank)

    @property
    def ainvs(self) -> tuple[int, ...]:
        return self.model.ainvs

    @cached_property
    def bad_primes(self) -> list[int]:
        return list(factor(self.model.disc))

    @cached_property
    def local(self) -> dict[int, LocalReduction]:
        return {p: local_reduction(self.model, p) for p in self.bad_primes}

    @cached_property
    def conductor(self) -> int:
        n = 1
        for p, loc in self.local.items():
            n *= p**loc.conductor_exponent
        return n

    def ap(self, p: int) -> int:
        """a_p for good p; +-1/0 for multiplicative/additive p."""
        loc = self.local.get(p)
        if loc is None:
            return ap_good(self.model, p)
        if loc.kind is ReductionType.SPLIT:
            return 1
        if loc.kind is ReductionType.NONSPLIT:
            return -1
        return 0

    def periods(self, prec: int | None = None) -> Periods:
        key = ("periods", prec or get_precision())
        if key not in self._cache:
            self._cache[key] = periods(self.model, prec)
        return self._cache[key]

    @property
    def name(self) -> str:
        return self.label or str(self.model)


# --------------------------------------------------------------- input / db

_DB_PATH = Path(__file__).with_name("data") / "curves.txt"


@dataclass(frozen=True)
class CurveRecord:
    label: str
    ainvs: tuple[int, int, int, int, int]
    conductor: int
    rank: int | None


def load_database(path: str | Path | None = None) -> list[CurveRecord]:
    """Read ``label a1 a2 a3 a4 a6 [conductor [rank]]`` lines; ``#`` starts a comment."""
    path = Path(path) if path else _DB_PATH
    out = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        label = parts[0]
        ainvs = tuple(int(x) for x in parts[1:6])
        cond = int(parts[6]) if len(parts) > 6 else EllipticCurve.from_ainvs(ainvs, allow_cm=True).conductor
        rank = int(parts[7]) if len(parts) > 7 and parts[7] != "?" else None
        out.append(CurveRecord(label, ainvs, cond, rank))
    return out


@lru_cache(maxsize=4)
def _db_index(path: str | None) -> dict[str, CurveRecord]:
    return {r.label: r for r in load_database(path)}


_AINV_RE = re.compile(r"^\[?\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*,\s*(-?\d+)\s*\]?$")


def parse_curve(text: str, db: str | Path | None = None) -> EllipticCurve:
    """Curve from ``a1,a2,a3,a4,a6``, ``[a1,...,a6]`` or a database label."""
    text = text.strip()
    m = _AINV_RE.match(text)
    if m:
        return EllipticCurve.from_ainvs([int(g) for g in m.groups()])
    index = _db_index(str(db) if db else None)
    rec = index.get(text)
    if rec is None:
        raise CurveError(f"unknown curve {text!r}: not a-invariants and not in the database")
    return EllipticCurve.from_ainvs(rec.ainvs, label=rec.label, rank=rec.rank)
