"""The global L-function of Sym^m E: conductor, scale constant, sign, coefficients.

Coefficients b(n) are in the arithmetic normalisation (integers, b(p) the
trace of Sym^m Frobenius).  The summation engine wants c(n) = b(n)/n^(m/2),
which is produced either as exact integers (``block_exact``) or as
double-double pairs (``block_dd``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import mp, mpf

from . import _dd
from ._fastcount import prime_sieve, traces_of_frobenius
from .curves import CMCurveError, EllipticCurve, cm_discriminant
from .local import InertiaGroup, LocalKind, epsilon, local_data
from .numerics import get_precision

__all__ = [
    "MAX_TERMS",
    "TermCapError",
    "global_conductor",
    "scale_constant",
    "GlobalLData",
    "global_ldata",
    "coefficients",
    "prime_power_coefficients",
    "SignReport",
    "w_infinity",
    "sign_theoretical",
]

MAX_TERMS = 10**8


class TermCapError(ValueError):
    pass


def _reject_cm(curve: EllipticCurve) -> None:
    d = cm_discriminant(curve.model)
    if d is not None:
        raise CMCurveError(
            f"curve {curve.name} has CM by discriminant {d}; its symmetric powers "
            "factor into Hecke L-functions, which is not supported"
        )


def global_conductor(curve: EllipticCurve, m: int) -> int:
    """N_m = prod over bad p of p^(tame + wild exponent)."""
    _reject_cm(curve)
    n = 1
    for p in curve.bad_primes:
        n *= p ** local_data(curve, p).conductor(m)
    return n


def scale_constant(conductor: int, m: int, prec: int | None = None) -> mpf:
    """C_m with C_m^2 = N_m/(2 pi)^(m+1), doubled for even m."""
    P = get_precision() if prec is None else prec
    with mp.workprec(P + 20):
        c2 = mpf(conductor) / (2 * mp.pi) ** (m + 1)
        if m % 2 == 0:
            c2 *= 2
        return +mp.sqrt(c2)


def _inverse_series(poly: tuple[int, ...], length: int) -> list[int]:
    """Coefficients of 1/P(T) up to T^(length-1)."""
    out = [1]
    for k in range(1, length):
        s = 0
        for i in range(1, min(k, len(poly) - 1) + 1):
            s -= poly[i] * out[k - i]
        out.append(s)
    return out


def prime_power_coefficients(curve: EllipticCurve, m: int, p: int, e_max: int) -> list[int]:
    """[b(1), b(p), ..., b(p^e_max)] from the Euler polynomial at p."""
    return _inverse_series(local_data(curve, p).euler_polynomial(m).coeffs, e_max + 1)


def _good_traces_exact(m: int, ap: np.ndarray, primes: np.ndarray) -> np.ndarray:
    """b(p) = trace of Sym^m Frobenius at each good p, as Python ints."""
    a = ap.astype(object)
    q = primes.astype(object)
    prev = np.ones(len(a), dtype=object)
    cur = a.copy() if m else prev
    for _ in range(1, m):
        prev, cur = cur, a * cur - q * prev
    return cur


@dataclass
class GlobalLData:
    """One symmetric power L(Sym^m E, s) with the data the engine needs."""

    curve: EllipticCurve
    m: int
    conductor: int
    sign: int | None = None
    sign_report: "SignReport | None" = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def odd(self) -> bool:
        return self.m % 2 == 1

    @property
    def u(self) -> int | None:
        return (self.m + 1) // 2 if self.odd else None

    @property
    def v(self) -> int | None:
        return None if self.odd else self.m // 2

    @property
    def kappa(self) -> int:
        """Evaluation point: the centre for odd m, the edge v+1 for even m."""
        return self.u if self.odd else self.v + 1

    @property
    def lam(self) -> int:
        return self.m + 1 - self.kappa

    def C(self, prec: int | None = None) -> mpf:
        return scale_constant(self.conductor, self.m, prec)

    # -- coefficient tables -------------------------------------------------

    def _prime_data(self, n_max: int):
        """Primes up to n_max, a_p for the good ones >= 5, bad-prime set."""
        key = ("primes", self.m)
        have = self._cache.get(key)
        if have is not None and have[0] >= n_max:
            return have[1]
        curve = self.curve
        ckey = ("ap_table",)
        old = curve._cache.get(ckey)
        if old is not None and old[0] >= n_max:
            primes, ap = old[1], old[2]
            cut = np.searchsorted(primes, n_max, side="right")
            primes, ap = primes[:cut], ap[:cut]
        else:
            primes = prime_sieve(max(n_max, 2))
            ap = np.zeros(len(primes), dtype=np.int64)
            good = primes >= 5
            for p in curve.bad_primes:
                i = np.searchsorted(primes, p)
                if i < len(primes) and primes[i] == p:
                    good[i] = False
            idx = np.nonzero(good)[0]
            if len(idx):
                ap[idx] = traces_of_frobenius(curve.model.c4, curve.model.c6, primes[idx])
            for i in np.nonzero(~good)[0]:
                ap[i] = curve.ap(int(primes[i]))
            curve._cache[ckey] = (n_max, primes, ap)
        self._cache[key] = (n_max, (primes, ap))
        return primes, ap

    def _small_tables(self, n_max: int):
        """Exact b(p^e) for p <= sqrt(n_max), p^e <= n_max."""
        key = ("small", n_max)
        if key not in self._cache:
            root = math.isqrt(n_max)
            small = [int(p) for p in prime_sieve(root)] if root >= 2 else []
            tabs = []
            for p in small:
                e_max = 0
                q = p
                while q <= n_max:
                    e_max += 1
                    q *= p
                tabs.append(prime_power_coefficients(self.curve, self.m, p, e_max))
            self._cache[key] = (small, tabs)
        return self._cache[key]

    def _bad_large(self, n_max: int) -> dict[int, int]:
        root = math.isqrt(n_max)
        return {
            p: prime_power_coefficients(self.curve, self.m, p, 1)[1]
            for p in self.curve.bad_primes
            if root < p <= n_max
        }

    def block_exact(self, lo: int, hi: int, n_max: int | None = None) -> np.ndarray:
        """Exact b(n) for lo <= n < hi as a numpy object array."""
        n_max = hi - 1 if n_max is None else n_max
        if hi - 1 > n_max:
            raise ValueError("block exceeds n_max")
        primes, ap = self._prime_data(n_max)
        small, tabs = self._small_tables(n_max)
        size = hi - lo
        out = np.ones(size, dtype=object)
        rem = np.arange(lo, hi, dtype=np.int64)
        for p, tab in zip(small, tabs):
            start = (-lo) % p
            if start >= size:
                continue
            val = np.zeros(size, dtype=np.int64)
            pe = p
            e = 1
            while pe < hi:
                s = (-lo) % pe
                val[s::pe] = e
                rem[s::pe] //= p
                pe *= p
                e += 1
            for k in range(1, len(tab)):
                sel = np.nonzero(val == k)[0]
                if len(sel):
                    out[sel] = out[sel] * tab[k]
        left = np.nonzero(rem > 1)[0]
        if len(left):
            rp = rem[left]
            pos = np.searchsorted(primes, rp)
            large = _good_traces_exact(self.m, ap[pos], primes[pos])
            for p, b in self._bad_large(n_max).items():
                large[rp == p] = b
            out[left] = out[left] * large
        return out

    def _dd_tables(self, n_max: int):
        key = ("dd", n_max)
        if key in self._cache:
            return self._cache[key]
        primes, ap = self._prime_data(n_max)
        small, tabs = self._small_tables(n_max)
        half = Fraction(self.m, 2)
        vals, off = [], [0]
        with mp.workprec(160):
            for p, tab in zip(small, tabs):
                for e in range(1, len(tab)):
                    vals.append(mpf(tab[e]) / mpf(p) ** (e * half))
                off.append(len(vals))
        tab_hi, tab_lo = _dd.split_dd(vals)
        cp_hi = np.empty(len(primes))
        cp_lo = np.empty(len(primes))
        _dd.normalized_good_traces(self.m, ap, primes, cp_hi, cp_lo)
        bad = self._bad_large(n_max)
        with mp.workprec(160):
            for p, b in bad.items():
                i = int(np.searchsorted(primes, p))
                h, l = _dd.split_dd([mpf(b) / mpf(p) ** half])
                cp_hi[i], cp_lo[i] = h[0], l[0]
        out = (
            np.array(small, dtype=np.int64),
            np.array(off, dtype=np.int64),
            tab_hi,
            tab_lo,
            primes,
            cp_hi,
            cp_lo,
        )
        # keep only the latest table set
        for k in [k for k in self._cache if k[0] == "dd"]:
            del self._cache[k]
        self._cache[key] = out
        return out

    def block_dd(self, lo: int, hi: int, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """c(n) = b(n)/n^(m/2) for lo <= n < hi as double-double arrays."""
        small, off, th, tl, primes, ch, cl = self._dd_tables(n_max)
        out_hi = np.empty(hi - lo)
        out_lo = np.empty(hi - lo)
        _dd.block_coefficients(lo, hi, small, off, th, tl, primes, ch, cl, out_hi, out_lo)
        return out_hi, out_lo


def global_ldata(curve: EllipticCurve, m: int, sign: int | None = None) -> GlobalLData:
    """Build (and cache on the curve) the global data; the sign is filled lazily."""
    if m < 1:
        raise ValueError("symmetric power must be >= 1")
    key = ("global", m)
    if key not in curve._cache:
        g = GlobalLData(curve, m, global_conductor(curve, m))
        rep = sign_theoretical(curve, m)
        g.sign_report = rep
        if rep.theoretical is not None and not rep.conjectural:
            g.sign = rep.theoretical
        curve._cache[key] = g
    g = curve._cache[key]
    if sign is not None:
        g.sign = sign
    return g


def coefficients(g: GlobalLData, n_max: int) -> list[int]:
    """[b(1), ..., b(n_max)] exactly."""
    if n_max > MAX_TERMS:
        raise TermCapError(f"{n_max} coefficients exceeds the cap of {MAX_TERMS}")
    if n_max < 1:
        return []
    return list(g.block_exact(1, n_max + 1, n_max))


# ------------------------------------------------------------------- signs


@dataclass
class SignReport:
    """Root number w_m with its local decomposition.

    ``factors`` maps "inf" or a prime to +1/-1, or None where unknown.
    """

    m: int
    theoretical: int | None
    factors: dict = field(default_factory=dict)
    conjectural: bool = False
    notes: list[str] = field(default_factory=list)
    experimental: int | None = None
    gap_ratio: float | None = None
    precision: int | None = None

    @property
    def agreement(self) -> bool | None:
        if self.theoretical is None or self.experimental is None:
            return None
        return self.theoretical == self.experimental

    @property
    def sign(self) -> int | None:
        """Theoretical if unconditional, else the experimental value."""
        if self.theoretical is not None and not self.conjectural:
            return self.theoretical
        if self.experimental is not None:
            return self.experimental
        return self.theoretical


def _legendre(a: int, p: int) -> int:
    r = pow(a % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


def _kronecker_minus2(m: int) -> int:
    return {1: 1, 3: 1, 5: -1, 7: -1}[m % 8]


def w_infinity(m: int) -> int:
    """Archimedean root number for odd m: -(-2|m)."""
    if m % 2 == 0:
        return 1
    return -_kronecker_minus2(m)


# w_m(3) for m = 1, 3, 5, 7, 9, 11 mod 12, by (inertia group, w_1(3))
_W3 = {
    (InertiaGroup.C3, 1): "++++++",
    (InertiaGroup.C4, 1): "++++++",
    (InertiaGroup.C6, 1): "+---++",
    (InertiaGroup.C3xC4, 1): "++-+++",
    (InertiaGroup.C2, -1): "-+-+-+",
    (InertiaGroup.C6, -1): "-+-+-+",
    (InertiaGroup.C3xC4, -1): "-----+",
}

_ROHRLICH = {
    InertiaGroup.C2: -1,
    InertiaGroup.C6: -1,
    InertiaGroup.C4: -2,
    InertiaGroup.C3: -3,
}


def _w1_known(curve: EllipticCurve, p: int) -> int | None:
    """w_1(p) where it follows from the reduction type alone."""
    data = local_data(curve, p)
    if data.kind is LocalKind.GOOD:
        return 1
    if data.kind is LocalKind.SPLIT:
        return -1
    if data.kind is LocalKind.NONSPLIT:
        return 1
    if p in (2, 3) and data.kind is LocalKind.POT_GOOD:
        return None
    if p == 2:
        return None
    if data.kind is LocalKind.POT_MULT:
        return _legendre(-1, p)
    return _legendre(_ROHRLICH[data.phi], p)


def sign_theoretical(curve: EllipticCurve, m: int, w1_global: int | None = None) -> SignReport:
    """w_m as a product of local root numbers.

    At 2 and 3 (additive reduction) the local rule needs w_1(p), which is
    recovered from the global m = 1 sign ``w1_global`` when it is the only
    unknown factor; those factors are marked conjectural.
    """
    if m % 2 == 0:
        return SignReport(m, 1, {"inf": 1}, notes=["even power: sign +1"])
    rep = SignReport(m, None)
    factors = {"inf": w_infinity(m)}
    w1 = {p: _w1_known(curve, p) for p in curve.bad_primes}
    unknown = [p for p, w in w1.items() if w is None]
    if len(unknown) == 1 and w1_global is not None:
        rest = -1  # w_1(inf)
        for p, w in w1.items():
            if w is not None:
                rest *= w
        w1[unknown[0]] = w1_global * rest
        rep.notes.append(f"w_1({unknown[0]}) = {w1[unknown[0]]:+d} from the m=1 sign")
    elif unknown:
        rep.notes.append(f"w_1 unknown at {unknown}")
    u = (m + 1) // 2
    for p in curve.bad_primes:
        data = local_data(curve, p)
        w = w1[p]
        if data.kind in (LocalKind.SPLIT, LocalKind.NONSPLIT):
            factors[p] = w**m
            continue
        if p in (2, 3):
            rep.conjectural = True
        if w is None:
            factors[p] = None
            continue
        if data.kind is LocalKind.POT_MULT:
            factors[p] = w**u
        elif p == 3:
            row = _W3.get((data.phi, w))
            if row is not None:
                factors[p] = 1 if row[(m % 12) // 2] == "+" else -1
            else:
                factors[p] = w ** (epsilon(m, data.phi) // 2)
                rep.notes.append(f"no w_m(3) table row for {data.phi} with w_1(3)={w:+d}; used w_1^(eps/2)")
        elif p == 2:
            eta = -1 if (data.conductor_exponent % 2 == 1 and m % 8 == 3) else 1
            factors[p] = eta * w ** (epsilon(m, data.phi) // 2)
        else:
            factors[p] = w ** (epsilon(m, data.phi) // 2)
    rep.factors = factors
    if all(f is not None for f in factors.values()):
        rep.theoretical = math.prod(factors.values())
    return rep
