"""Local data at a prime: inertia groups, tame and wild conductors,
Frobenius eigenvalues and Euler polynomials of symmetric powers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mp, mpc, mpf

from .curves import (
    EllipticCurve,
    ReductionType,
    WeierstrassModel,
    ap_good,
    local_reduction,
    minimal_twist_at,
    valuation,
)
from .numerics import get_precision


class LocalError(ValueError):
    pass


class InertiaGroup(enum.Enum):
    C1 = ("C1", 1)
    C2 = ("C2", 2)
    C3 = ("C3", 3)
    C4 = ("C4", 4)
    C6 = ("C6", 6)
    Q8 = ("Q8", 8)
    SL2F3 = ("SL2F3", 24)
    C3xC4 = ("C3:C4", 12)

    @property
    def tag(self) -> str:
        return self.value[0]

    @property
    def order(self) -> int:
        return self.value[1]

    @property
    def cyclic(self) -> bool:
        return self in (InertiaGroup.C1, InertiaGroup.C2, InertiaGroup.C3, InertiaGroup.C4, InertiaGroup.C6)

    def __str__(self) -> str:
        return self.tag


def trace_sym(m: int, t, det):
    """Trace of the m-th symmetric power of a 2x2 matrix with trace t and determinant det."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    total = 0 * t
    for k in range(m // 2 + 1):
        total += math.comb(m - k, k) * t ** (m - 2 * k) * (-det) ** k
    return total


# Fixed-subspace dimensions by m mod 12; each entry is (a, b, c) meaning (a*m + b)/c.
_BETA_TABLE = {
    InertiaGroup.C2: [(1, 1, 1), (0, 0, 1)] * 6,
    InertiaGroup.C3: [(1, 3, 3), (1, -1, 3), (1, 1, 3), (1, 3, 3), (1, -1, 3), (1, 1, 3),
                      (1, 3, 3), (1, -1, 3), (1, 1, 3), (1, 3, 3), (1, -1, 3), (1, 1, 3)],
    InertiaGroup.C4: [(1, 2, 2), (0, 0, 1), (1, 0, 2), (0, 0, 1)] * 3,
    InertiaGroup.C6: [(1, 3, 3), (0, 0, 1), (1, 1, 3), (0, 0, 1), (1, -1, 3), (0, 0, 1)] * 2,
    InertiaGroup.Q8: [(1, 4, 4), (0, 0, 1), (1, -2, 4), (0, 0, 1)] * 3,
    InertiaGroup.C3xC4: [(1, 6, 6), (0, 0, 1), (1, -2, 6), (0, 0, 1), (1, 2, 6), (0, 0, 1),
                         (1, 0, 6), (0, 0, 1), (1, 4, 6), (0, 0, 1), (1, -4, 6), (0, 0, 1)],
    InertiaGroup.SL2F3: [(1, 12, 12), (0, 0, 1), (1, -2, 12), (0, 0, 1), (1, -4, 12), (0, 0, 1),
                         (1, 6, 12), (0, 0, 1), (1, 4, 12), (0, 0, 1), (1, -10, 12), (0, 0, 1)],
}


def beta(m: int, phi: InertiaGroup) -> int:
    """Dimension of the phi-fixed subspace of the m-th symmetric power."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if phi is InertiaGroup.C1:
        return m + 1
    a, b, c = _BETA_TABLE[phi][m % 12]
    q, r = divmod(a * m + b, c)
    if r:
        raise LocalError(f"non-integral fixed dimension for m={m}, {phi}")
    return q


# ---------------------------------------------------------- group oracle


def _quat(a, b, c, d):
    # a + bi + cj + dk as a 2x2 complex matrix
    return ((complex(a, b), complex(c, d)), (complex(-c, d), complex(a, -b)))


def _matmul(x, y):
    return tuple(
        tuple(sum(x[i][k] * y[k][j] for k in range(2)) for j in range(2)) for i in range(2)
    )


def _key(x):
    return tuple(round(v.real, 9) + 1j * round(v.imag, 9) for row in x for v in row)


def _closure(gens):
    one = ((1 + 0j, 0j), (0j, 1 + 0j))
    elems = {_key(one): one}
    frontier = [one]
    while frontier:
        new = []
        for g in frontier:
            for h in gens:
                x = _matmul(g, h)
                k = _key(x)
                if k not in elems:
                    elems[k] = x
                    new.append(x)
        frontier = new
    return list(elems.values())


@lru_cache(maxsize=None)
def group_traces(phi: InertiaGroup) -> tuple[int, ...]:
    """Traces of the faithful 2-dimensional determinant-one representation."""
    if phi.cyclic:
        d = phi.order
        z = complex(math.cos(2 * math.pi / d), math.sin(2 * math.pi / d))
        gens = [((z, 0j), (0j, 1 / z))]
    elif phi is InertiaGroup.Q8:
        gens = [_quat(0, 1, 0, 0), _quat(0, 0, 1, 0)]
    elif phi is InertiaGroup.SL2F3:
        gens = [_quat(0, 1, 0, 0), _quat(0, 0, 1, 0), _quat(-0.5, 0.5, 0.5, 0.5)]
    else:
        z = complex(math.cos(math.pi / 3), math.sin(math.pi / 3))
        gens = [((z, 0j), (0j, 1 / z)), _quat(0, 0, 1, 0)]
    elems = _closure(gens)
    if len(elems) != phi.order:
        raise LocalError(f"generated {len(elems)} elements for {phi}")
    out = []
    for g in elems:
        t = g[0][0] + g[1][1]
        det = g[0][0] * g[1][1] - g[0][1] * g[1][0]
        if abs(det - 1) > 1e-9 or abs(t.imag) > 1e-9 or abs(t.real - round(t.real)) > 1e-9:
            raise LocalError("bad representation matrix")
        out.append(int(round(t.real)))
    return tuple(sorted(out))


def beta_oracle(m: int, phi: InertiaGroup) -> int:
    """Fixed dimension by averaging symmetric-power characters over the group."""
    traces = group_traces(phi)
    total = sum(trace_sym(m, t, 1) for t in traces)
    q, r = divmod(total, len(traces))
    if r:
        raise LocalError("character inner product is not an integer")
    return q


def _check_beta_table(max_m: int = 48) -> None:
    for phi in InertiaGroup:
        for m in range(max_m + 1):
            if beta(m, phi) != beta_oracle(m, phi):
                raise LocalError(f"fixed-dimension table disagrees with the group oracle at m={m}, {phi}")


_check_beta_table()


def epsilon(m: int, phi: InertiaGroup) -> int:
    return m + 1 - beta(m, phi)


# ------------------------------------------------------------- local data


class LocalKind(enum.Enum):
    GOOD = "good"
    SPLIT = "split multiplicative"
    NONSPLIT = "nonsplit multiplicative"
    POT_MULT = "potentially multiplicative"
    POT_GOOD = "potentially good"


@dataclass(frozen=True)
class EulerPolynomial:
    """P(T) with local factor 1/P(p^-s); coefficients lowest degree first."""

    p: int
    m: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if not self.coeffs or self.coeffs[0] != 1:
            raise LocalError("Euler polynomial must have constant term 1")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if i == 0 else ("T" if i == 1 else f"T^{i}")
            if i == 0:
                s = str(c)
            elif abs(c) == 1:
                s = mono
            else:
                s = f"{abs(c)}{mono}"
            if terms:
                terms.append(("- " if c < 0 else "+ ") + s)
            else:
                terms.append(("-" if c < 0 else "") + s)
        return " ".join(terms)


def _polymul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _trim(a: list[int]) -> tuple[int, ...]:
    a = list(a)
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return tuple(a)


def power_sums(a: int, p: int, k_max: int) -> list[int]:
    """s_k = alpha^k + conj(alpha)^k for alpha + conj(alpha) = a, alpha*conj(alpha) = p."""
    s = [2, a]
    for _ in range(2, k_max + 1):
        s.append(a * s[-1] - p * s[-2])
    return s[: k_max + 1]


def abelian_euler_poly(a: int, p: int, m: int, d: int) -> tuple[int, ...]:
    """prod over 0<=i<=m with d | (2i-m) of (1 - alpha^(m-i) conj(alpha)^i T), exactly."""
    s = power_sums(a, p, m)
    poly = [1]
    for i in range((m + 1) // 2):
        if (m - 2 * i) % d == 0:
            poly = _polymul(poly, [1, -(p**i) * s[m - 2 * i], p**m])
    if m % 2 == 0:
        poly = _polymul(poly, [1, -(p ** (m // 2))])
    return _trim(poly)


def euler_poly_from_alpha(alpha, p: int, m: int, d: int, prec: int | None = None) -> tuple[int, ...]:
    """Numerical expansion of the abelian-case product from a complex eigenvalue,
    rounded to integers with tolerance 2^(-P/4) relative to the coefficient scale."""
    P = get_precision() if prec is None else prec
    with mp.workprec(P + 20):
        alpha = mpc(alpha)
        beta_ = mpmath.conj(alpha)
        poly = [mpc(1)]
        for i in range(m + 1):
            if (2 * i - m) % d:
                continue
            root = alpha ** (m - i) * beta_**i
            new = [mpc(0)] * (len(poly) + 1)
            for j, c in enumerate(poly):
                new[j] += c
                new[j + 1] -= c * root
            poly = new
        out = []
        for j, c in enumerate(poly):
            r = int(mpmath.nint(c.real))
            scale = max(1, mpf(p) ** (j * m / mpf(2)) * math.comb(len(poly) - 1, j))
            if abs(c - r) > mpf(2) ** (-(P // 4)) * scale:
                raise LocalError(f"Euler coefficient {j} is not integral: {mpmath.nstr(c, 15)}")
            out.append(r)
    return _trim(out)


def nonabelian_euler_poly(p: int, m: int, phi: InertiaGroup) -> tuple[int, ...]:
    b = beta(m, phi)
    if m % 2:
        if phi is InertiaGroup.C3:
            poly = [1]
            for _ in range(b // 2):
                poly = _polymul(poly, [1, 0, p**m])
            return _trim(poly)
        if b:
            raise LocalError(f"odd m with nonzero fixed space for {phi}")
        return (1,)
    A = (b + 1) // 2
    B = b - A
    root = (-p) ** (m // 2)
    poly = [1]
    for _ in range(A):
        poly = _polymul(poly, [1, -root])
    for _ in range(B):
        poly = _polymul(poly, [1, root])
    return _trim(poly)


@dataclass
class LocalData:
    """Everything about E at p needed for symmetric-power Euler factors."""

    p: int
    kind: LocalKind
    conductor_exponent: int  # v_p(N)
    phi: InertiaGroup | None = None
    abelian: bool | None = None
    trace: int | None = None  # alpha + conj(alpha) where alpha is needed
    a_p: int | None = None  # for multiplicative reduction
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def alpha(self) -> mpc:
        if self.trace is None:
            raise LocalError("no Frobenius eigenvalue in this case")
        return _alpha_from_trace(self.trace, self.p)

    @property
    def d(self) -> int:
        return self.phi.order if self.phi is not None else 1

    def tame(self, m: int) -> int:
        if self.kind is LocalKind.GOOD:
            return 0
        if self.kind in (LocalKind.SPLIT, LocalKind.NONSPLIT):
            return m
        if self.kind is LocalKind.POT_MULT:
            return m + 1 if m % 2 else m
        return epsilon(m, self.phi)

    def wild(self, m: int) -> int:
        p = self.p
        if p >= 5 or self.kind in (LocalKind.GOOD, LocalKind.SPLIT, LocalKind.NONSPLIT):
            return 0
        if self.kind is LocalKind.POT_MULT:
            if p == 3 or m % 2 == 0:
                return 0
            delta1 = self.conductor_exponent - 2
            return (m + 1) // 2 * delta1
        delta1 = self.conductor_exponent - epsilon(1, self.phi)
        if delta1 == 0:
            return 0
        row = _WILD_ROWS.get((p, self.phi, delta1))
        if row is None:
            raise LocalError(f"no wild-conductor row for p={p}, {self.phi}, delta_1={delta1}")
        val = sum(Fraction(c) * epsilon(m, g) for c, g in row)
        if val.denominator != 1 or val < 0:
            raise LocalError(f"non-integral wild conductor {val} at p={p}, {self.phi}, m={m}")
        return int(val)

    def conductor(self, m: int) -> int:
        return self.tame(m) + self.wild(m)

    def euler_polynomial(self, m: int) -> EulerPolynomial:
        key = ("euler", m)
        if key not in self.cache:
            self.cache[key] = EulerPolynomial(self.p, m, self._euler(m))
        return self.cache[key]

    def _euler(self, m: int) -> tuple[int, ...]:
        p = self.p
        if self.kind is LocalKind.GOOD:
            return abelian_euler_poly(self.trace, p, m, 1)
        if self.kind in (LocalKind.SPLIT, LocalKind.NONSPLIT):
            return _trim([1, -(self.a_p**m)])
        if self.kind is LocalKind.POT_MULT:
            return (1,) if m % 2 else (1, -1)
        if self.abelian:
            return abelian_euler_poly(self.trace, p, m, self.d)
        return nonabelian_euler_poly(p, m, self.phi)


C2, C3, C4, C6, Q8, SL2F3, C3xC4 = (
    InertiaGroup.C2,
    InertiaGroup.C3,
    InertiaGroup.C4,
    InertiaGroup.C6,
    InertiaGroup.Q8,
    InertiaGroup.SL2F3,
    InertiaGroup.C3xC4,
)

_F = Fraction
# (p, inertia group, delta_1) -> [(coefficient, group whose epsilon_m enters)]
_WILD_ROWS = {
    (2, C2, 2): [(1, C2)],
    (2, C6, 2): [(1, C2)],
    (2, C2, 4): [(2, C2)],
    (2, C6, 4): [(2, C2)],
    (2, C4, 6): [(2, C4), (1, C2)],
    (2, Q8, 3): [(1, Q8), (_F(1, 2), C2)],
    (2, Q8, 4): [(1, Q8), (1, C2)],
    (2, Q8, 6): [(1, Q8), (1, C4), (1, C2)],
    (2, SL2F3, 1): [(_F(1, 3), Q8), (_F(1, 6), C2)],
    (2, SL2F3, 2): [(_F(1, 3), Q8), (_F(2, 3), C2)],
    (2, SL2F3, 4): [(_F(1, 3), Q8), (_F(5, 3), C2)],
    (2, SL2F3, 5): [(_F(5, 3), Q8), (_F(5, 6), C2)],
    (3, C3, 2): [(1, C3)],
    (3, C6, 2): [(1, C3)],
    (3, C3xC4, 1): [(_F(1, 2), C3)],
    (3, C3xC4, 3): [(_F(3, 2), C3)],
}


def _alpha_from_trace(a: int, p: int, prec: int | None = None) -> mpc:
    P = get_precision() if prec is None else prec
    with mp.workprec(P + 10):
        disc = 4 * p - a * a
        if disc < 0:
            raise LocalError(f"|a'| = {abs(a)} exceeds 2 sqrt({p})")
        return mpc(mpf(a) / 2, mpmath.sqrt(disc) / 2)


def _short_model(model: WeierstrassModel) -> tuple[int, int]:
    return -27 * model.c4, -54 * model.c6


def _rescaled_trace(model: WeierstrassModel, p: int) -> int:
    """a' from the reduction of y^2 = x^3 + A/t^2 x + B/t^3, t = p^min(v(A)/2, v(B)/3)."""
    A, B = _short_model(model)
    vA = valuation(A, p) if A else None
    vB = valuation(B, p) if B else None
    cands = []
    if vA is not None:
        cands.append(Fraction(vA, 2))
    if vB is not None:
        cands.append(Fraction(vB, 3))
    mu = min(cands)
    Abar = (A // p**vA) % p if vA is not None and Fraction(vA, 2) == mu else 0
    Bbar = (B // p**vB) % p if vB is not None and Fraction(vB, 3) == mu else 0
    if (4 * Abar**3 + 27 * Bbar**2) % p == 0:
        raise LocalError(f"rescaled reduction at {p} is singular")
    return ap_good(WeierstrassModel(0, 0, 0, Abar, Bbar), p)


def inertia_group(curve: EllipticCurve, p: int) -> InertiaGroup:
    loc = curve.local.get(p)
    if loc is None:
        return InertiaGroup.C1
    if loc.is_multiplicative or loc.potentially_multiplicative:
        raise LocalError(f"inertia group requested at a (potentially) multiplicative prime {p}")
    vD = loc.disc_valuation
    vN = loc.conductor_exponent
    if p >= 5:
        d = 12 // math.gcd(12, vD)
        return {1: InertiaGroup.C1, 2: C2, 3: C3, 4: C4, 6: C6}[d]
    if p == 3:
        if vN == 2:
            return C2 if vD % 2 == 0 else C4
        if vN == 4:
            return C3 if vD % 4 == 0 else C6
        if vN in (3, 5):
            return C3xC4
        raise LocalError(f"unexpected v_3(N) = {vN}")
    F, vM = minimal_twist_at(curve.model, 2)
    if vM == 0:
        return InertiaGroup.C1 if vN == 0 else C2
    if vM == 2:
        return C3 if vN == 2 else C6
    if vM in (3, 7):
        return SL2F3
    if vM == 5:
        return Q8
    if vM == 8:
        return Q8 if F.c6 % 2**9 == 0 else C4
    raise LocalError(f"unexpected conductor exponent {vM} of the minimal twist at 2")


def is_abelian(curve: EllipticCurve, p: int, phi: InertiaGroup) -> bool:
    if phi is InertiaGroup.C1:
        return True
    if p >= 5:
        return p % phi.order == 1
    if p == 3:
        if phi is C2:
            return True
        if phi in (C3, C6):
            F, _ = minimal_twist_at(curve.model, 3)
            c4, c6 = F.c4, F.c6
            if c4 % 27 == 9:
                return c6 % 243 in (108, 243 - 108)
            if c4 % 27 == 0:
                return c4 % 81 == 27
            return False
        return False
    if phi is C2:
        return True
    if phi is C4:
        F, _ = minimal_twist_at(curve.model, 2)
        return F.c4 % 128 == 96
    return False


def local_data(curve: EllipticCurve, p: int) -> LocalData:
    """Assemble (and cache on the curve) the local data at p."""
    key = ("local", p)
    if key in curve._cache:
        return curve._cache[key]
    loc = curve.local.get(p)
    if loc is None:
        data = LocalData(p, LocalKind.GOOD, 0, InertiaGroup.C1, True, trace=ap_good(curve.model, p))
    elif loc.kind is ReductionType.SPLIT:
        data = LocalData(p, LocalKind.SPLIT, 1, a_p=1)
    elif loc.kind is ReductionType.NONSPLIT:
        data = LocalData(p, LocalKind.NONSPLIT, 1, a_p=-1)
    elif loc.potentially_multiplicative:
        data = LocalData(p, LocalKind.POT_MULT, loc.conductor_exponent)
    else:
        phi = inertia_group(curve, p)
        ab = is_abelian(curve, p, phi)
        data = LocalData(p, LocalKind.POT_GOOD, loc.conductor_exponent, phi, ab)
        if ab:
            data.trace = _abelian_trace(curve, p, phi)
    curve._cache[key] = data
    return data


def _abelian_trace(curve: EllipticCurve, p: int, phi: InertiaGroup) -> int:
    if p >= 5:
        return _rescaled_trace(curve.model, p)
    if p == 3:
        if phi is C2:
            F, vM = minimal_twist_at(curve.model, 3)
            if vM:
                raise LocalError("minimal twist at 3 is not good")
            return ap_good(F, 3)
        return 3  # alpha = zeta_12 sqrt 3
    if phi is C2:
        F, vM = minimal_twist_at(curve.model, 2)
        if vM:
            raise LocalError("minimal twist at 2 is not good")
        return ap_good(F, 2)
    return 2  # alpha = zeta_8 sqrt 2


def frobenius_eigenvalue(curve: EllipticCurve, p: int, prec: int | None = None) -> mpc:
    data = local_data(curve, p)
    if data.trace is None:
        raise LocalError(f"no abelian Frobenius eigenvalue at {p}")
    return _alpha_from_trace(data.trace, p, prec)


def euler_factor(curve: EllipticCurve, p: int, m: int) -> EulerPolynomial:
    return local_data(curve, p).euler_polynomial(m)


def tame_conductor(m: int, data: LocalData) -> int:
    return data.tame(m)


def wild_conductor(curve: EllipticCurve, p: int, m: int) -> int:
    return local_data(curve, p).wild(m)


def local_conductor(curve: EllipticCurve, p: int, m: int) -> int:
    return local_data(curve, p).conductor(m)
