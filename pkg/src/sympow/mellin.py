"""Gamma factors and the inverse Mellin kernels F_m^d(mu; x).

F_m^d(mu; x) is the inverse Mellin transform of gamma_m(z + mu)/z^(d+1).
Every pole of the integrand sits at an integer z = -k, so F is a sum of
residues x^k P_k(log x) with P_k a polynomial whose degree is one less
than the pole order.  The coefficients of P_k come from Laurent
expansions of the Gamma factors.

For x of moderate size the residue series cancels massively, so the
sum is done at a working precision raised by the observed cancellation.
Bulk evaluation goes through a mesh of Taylor expansions: nodes
x0 = i 2^k / 32 (32 <= i <= 63), each storing the value and 35 scaled
derivatives c_r = F^(r)(x0) h^r / r! with h = 2^k / 64, so that
F(x0 + t h) = sum_r c_r t^r for |t| <= 1.
"""

from __future__ import annotations

import math
import os
import struct
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import mpmath
import numpy as np
from mpmath import mp, mpf
from mpmath.libmp import from_man_exp

from .numerics import (
    GammaPoleError,
    TruncatedSeries,
    gamma_eval,
    get_precision,
    harmonic_H,
    zeta_const,
)

__all__ = [
    "GammaFactor",
    "gamma_factor",
    "harmonic_H",
    "gamma_series",
    "gamma_laurent",
    "gamma_half_laurent",
    "ResidueData",
    "residue_data",
    "F_value",
    "MellinMesh",
    "mesh_build",
    "mesh_eval",
    "mesh_eval_flagged",
    "MeshStore",
    "CancellationError",
    "MeshRangeError",
    "MeshFormatError",
    "TAYLOR_TERMS",
]

TAYLOR_TERMS = 36
NODES_PER_OCTAVE = 32
I_LO, I_HI = 32, 63
MESH_MAGIC = b"SPMESH"
MESH_VERSION = 1


class CancellationError(ArithmeticError):
    pass


class MeshRangeError(ValueError):
    pass


class MeshFormatError(ValueError):
    pass


# ---------------------------------------------------------------- gamma factors


@dataclass(frozen=True)
class GammaFactor:
    """gamma_m(s) as a product of Gamma(s - i) over ``shifts``, times
    Gamma(s/2 - half_shift) when m is even."""

    m: int
    shifts: tuple[int, ...]
    half_shift: int | None = None

    @property
    def degree(self) -> Fraction:
        """Effective number of full Gamma factors, (m + 1)/2."""
        return Fraction(self.m + 1, 2)

    def factors(self) -> list[tuple[Fraction, Fraction]]:
        """(alpha, beta) pairs with gamma_m(s) = prod Gamma(alpha s + beta)."""
        out = [(Fraction(1), Fraction(-i)) for i in self.shifts]
        if self.half_shift is not None:
            out.append((Fraction(1, 2), Fraction(-self.half_shift)))
        return out

    def __call__(self, s, prec: int | None = None):
        prec = get_precision() if prec is None else prec
        with mp.workprec(prec + 10):
            s = mpf(s.numerator) / s.denominator if isinstance(s, Fraction) else mp.mpmathify(s)
            val = mpf(1)
            for alpha, beta in self.factors():
                arg = s * (mpf(alpha.numerator) / alpha.denominator) + mpf(beta.numerator) / beta.denominator
                val *= gamma_eval(arg, prec + 10)
        with mp.workprec(prec):
            return +val

    def __str__(self) -> str:
        parts = []
        if self.half_shift is not None:
            parts.append("Gamma(s/2)" if self.half_shift == 0 else f"Gamma(s/2-{self.half_shift})")
        parts += ["Gamma(s)" if i == 0 else f"Gamma(s-{i})" for i in self.shifts]
        return "".join(parts)


def gamma_factor(m: int) -> GammaFactor:
    if m < 1:
        raise ValueError("gamma_factor needs m >= 1")
    if m % 2:
        return GammaFactor(m, tuple(range((m + 1) // 2)))
    v = m // 2
    return GammaFactor(m, tuple(range(v)), v // 2)


# ---------------------------------------------------------------- series of Gamma


@lru_cache(maxsize=256)
def _gamma_one_plus(length: int, prec: int) -> tuple:
    """Taylor coefficients of Gamma(1 + w) = exp(sum (-1)^n zeta(n) w^n / n)."""
    with mp.workprec(prec):
        log_coeffs = [mpf(0)] + [(-1) ** n * zeta_const(n, prec) / n for n in range(1, length)]
        return TruncatedSeries(log_coeffs).exp().coeffs


def _poly_series(roots_shift: Iterable, length: int) -> list:
    """Coefficients of prod (a + w) over the given a, truncated to ``length``."""
    out = [mpf(1)] + [mpf(0)] * (length - 1)
    for a in roots_shift:
        new = [mpf(0)] * length
        for n in range(length):
            new[n] += a * out[n]
            if n + 1 < length:
                new[n + 1] += out[n]
        out = new
    return out


def _mul_coeffs(a, b, length):
    out = []
    for n in range(length):
        s = mpf(0)
        for i in range(n + 1):
            s += a[i] * b[n - i]
        out.append(s)
    return out


def gamma_series(a, length: int, prec: int | None = None) -> TruncatedSeries:
    """Expansion of Gamma(a + w) in w, with ``length`` coefficients.

    ``a`` must be an integer or half-integer.  At a <= 0 integral the result
    has valuation -1.  Half-integers go through the duplication formula
    Gamma(1/2 + w) Gamma(1 + w) = sqrt(pi) 2^(-2w) Gamma(1 + 2w).
    """
    prec = get_precision() if prec is None else prec
    a = Fraction(a)
    if length < 1:
        raise ValueError("need at least one coefficient")
    wp = prec + 20
    with mp.workprec(wp):
        g1 = list(_gamma_one_plus(length, wp))
        if a.denominator == 1:
            a = int(a)
            if a <= 0:
                k = -a
                lead = mpf((-1) ** k) / math.factorial(k)
                h = [mpf(harmonic_H(k, n).numerator) / harmonic_H(k, n).denominator for n in range(length)]
                coeffs = [lead * c for c in _mul_coeffs(h, g1, length)]
                res = TruncatedSeries(coeffs, -1, Fraction(a))
            else:
                coeffs = _mul_coeffs(_poly_series(range(1, a), length), g1, length)
                res = TruncatedSeries(coeffs, 0, Fraction(a))
        elif a.denominator == 2:
            g2 = [c * mpf(2) ** n for n, c in enumerate(g1)]
            inv_g1 = TruncatedSeries(g1).inverse().coeffs
            ln2 = mp.ln2
            two = [mpf(1)]
            for n in range(1, length):
                two.append(two[-1] * (-2 * ln2) / n)
            half = _mul_coeffs(_mul_coeffs(g2, inv_g1, length), two, length)
            half = [mp.sqrt(mp.pi) * c for c in half]
            n0 = int(a - Fraction(1, 2))
            if n0 >= 0:
                shifts = [mpf(2 * j + 1) / 2 for j in range(n0)]
                coeffs = _mul_coeffs(_poly_series(shifts, length), half, length)
            else:
                # Gamma(a + w) = Gamma(a + 1 + w) / (a + w), stepping down from 1/2
                coeffs = half
                for j in range(1, -n0 + 1):
                    c = mpf(1) / 2 - j
                    lin = TruncatedSeries([c, mpf(1)] + [mpf(0)] * (length - 2))
                    coeffs = list((TruncatedSeries(coeffs) * lin.inverse()).coeffs)
            res = TruncatedSeries(coeffs, 0, a)
        else:
            raise ValueError("gamma_series supports integer and half-integer centers only")
    with mp.workprec(prec):
        return TruncatedSeries([+c for c in res.coeffs], res.valuation, res.center)


def gamma_laurent(k: int, length: int, prec: int | None = None) -> TruncatedSeries:
    """Laurent expansion of Gamma(z) about z = -k (a pole for k >= 0)."""
    return gamma_series(-k, length, prec)


def gamma_half_laurent(k: int, length: int, prec: int | None = None) -> TruncatedSeries:
    """Expansion of Gamma(z/2) in powers of (z + k)."""
    prec = get_precision() if prec is None else prec
    s = gamma_series(Fraction(-k, 2), length, prec)
    with mp.workprec(prec):
        out = s.scale_variable(mpf(1) / 2)
    return TruncatedSeries(out.coeffs, out.valuation, Fraction(-k))


# ---------------------------------------------------------------- residues


def _pole_order(gf: GammaFactor, d: int, mu: Fraction, k: int) -> int:
    r = d + 1 if k == 0 else 0
    for alpha, beta in gf.factors():
        c = alpha * (mu - k) + beta
        if c.denominator == 1 and c <= 0:
            r += 1
    return r


class ResidueData:
    """Residue polynomials of gamma_m(z + mu) x^(-z) / z^(d+1) at z = -k.

    ``q[k][j]`` is the coefficient with Res_{z=-k} = x^k sum_j q[k][j] (log x)^j.
    Coefficients are computed at a fixed precision and extended lazily in k.
    """

    def __init__(self, m: int, d: int, mu, prec: int):
        self.m = m
        self.d = d
        self.mu = Fraction(mu)
        self.prec = prec
        self.gf = gamma_factor(m)
        if self.mu.denominator != 1:
            raise ValueError("kernels are implemented for integral mu only")
        self.q: list[list[mpf]] = []

    def ensure(self, K: int) -> None:
        while len(self.q) < K:
            self.q.append(self._residue(len(self.q)))

    def _residue(self, k: int) -> list[mpf]:
        r = _pole_order(self.gf, self.d, self.mu, k)
        if r == 0:
            return []
        wp = self.prec + 16
        with mp.workprec(wp):
            total = None
            for alpha, beta in self.gf.factors():
                c = alpha * (self.mu - k) + beta
                s = gamma_series(c, r, wp)
                if alpha != 1:
                    s = TruncatedSeries(s.scale_variable(mpf(alpha.numerator) / alpha.denominator).coeffs, s.valuation)
                else:
                    s = TruncatedSeries(s.coeffs, s.valuation)
                total = s if total is None else total * s
            if k == 0:
                total = TruncatedSeries(total.coeffs, total.valuation - (self.d + 1))
            else:
                d = self.d
                base = mpf(-k) ** (-(d + 1))
                zc = [base * math.comb(n + d, d) / mpf(k) ** n for n in range(r)]
                total = total * TruncatedSeries(zc)
            # residue of G(w) x^k e^{-w log x}: sum_j g_{-1-j} (-L)^j / j!
            out = []
            for j in range(r):
                n = -1 - j
                g = total.coefficient(n) if n >= total.valuation else mpf(0)
                out.append(g * (-1) ** j / math.factorial(j))
        with mp.workprec(self.prec):
            return [+c for c in out]


_RESIDUE_CACHE: dict[tuple, ResidueData] = {}


def residue_data(m: int, d: int, mu, prec: int) -> ResidueData:
    """Shared residue tables; a table at higher precision serves lower requests."""
    key = (m, d, Fraction(mu))
    have = _RESIDUE_CACHE.get(key)
    if have is None or have.prec < prec:
        have = ResidueData(m, d, mu, max(prec, 64))
        _RESIDUE_CACHE[key] = have
    return have


def _stop_index(m: int, d: int, x: float) -> int:
    """Past this k the residue terms decrease at least geometrically."""
    u = (m + 1) / 2
    return int((4 * max(x, 1.0)) ** (1 / u)) + d + 4


def _cancellation_guess(m: int, x: float) -> int:
    u = (m + 1) / 2
    return int(2 * u * max(x, 0.0) ** (1 / u) / math.log(2)) + 8


@dataclass
class _SeriesSum:
    value: mpf
    log2_max_term: float
    terms: int


def _residue_sum(res: ResidueData, x: mpf, wp: int) -> _SeriesSum:
    K0 = _stop_index(res.m, res.d, float(x))
    with mp.workprec(wp):
        L = mp.log(x)
        total = mpf(0)
        maxterm = mpf(0)
        small_run = 0
        xk = mpf(1)
        k = 0
        while True:
            res.ensure(k + 1)
            q = res.q[k]
            if q:
                t = q[-1]
                for c in reversed(q[:-1]):
                    t = t * L + c
                t *= xk
                total += t
                at = abs(t)
                if at > maxterm:
                    maxterm = at
                if k > K0 and at <= maxterm * mpf(2) ** (-wp - 8):
                    small_run += 1
                    if small_run >= 3:
                        break
                else:
                    small_run = 0
            k += 1
            xk *= x
        lm = float(mp.log(maxterm, 2)) if maxterm else -math.inf
        return _SeriesSum(total, lm, k + 1)


def F_value(m: int, d: int, mu, x, prec: int | None = None, *, adaptive: bool = True) -> mpf:
    """F_m^d(mu; x) by summing residues, to ``prec`` bits relative.

    With ``adaptive`` the working precision is raised until it covers the
    observed cancellation; otherwise a CancellationError is raised when the
    largest term exceeds 2^(prec/2) times the result.
    """
    prec = get_precision() if prec is None else prec
    with mp.workprec(prec + 64):
        x = mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else mpf(x)
    if x <= 0:
        raise ValueError("F_value needs x > 0")
    # rounded up so nearby x share one residue table
    wp = -(-(prec + (_cancellation_guess(m, float(x)) if adaptive else 0) + 24) // 64) * 64
    for _ in range(6):
        res = residue_data(m, d, mu, wp)
        s = _residue_sum(res, x, wp)
        if s.value == 0:
            wp *= 2
            continue
        lost = s.log2_max_term - float(mp.log(abs(s.value), 2))
        if not adaptive:
            if lost > prec / 2:
                raise CancellationError(f"residue series lost {lost:.0f} bits at x={mp.nstr(x, 8)}")
            break
        if wp >= prec + lost + 16:
            break
        wp = -(-int(prec + lost + 40) // 64) * 64
    with mp.workprec(prec):
        return +s.value


# ---------------------------------------------------------------- mesh


def node_x(k: int, i: int) -> Fraction:
    return Fraction(i) * Fraction(2) ** (k - 5)


def nearest_node(x: float | mpf) -> tuple[int, int]:
    """(k, i) of the node closest to x; |x - x0| <= 2^k/64."""
    mant, e = math.frexp(float(x))  # x = mant 2^e, mant in [1/2, 1)
    k = e - 1
    i = int(round(mant * 64))
    if i == 64:
        k, i = k + 1, 32
    return k, i


@dataclass
class MellinMesh:
    """Taylor data of F_m^d(mu; .) on nodes i 2^k/32, k_lo <= k <= k_hi.

    ``nodes[(k - k_lo) * 32 + (i - 32)]`` holds TAYLOR_TERMS coefficients as
    mpmath raw tuples, each rounded to ``precision`` bits.
    """

    m: int
    d: int
    mu: Fraction
    precision: int
    k_lo: int
    k_hi: int
    nodes: list
    version: int = MESH_VERSION
    _dd: tuple | None = field(default=None, repr=False, compare=False)
    _fixed: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def i_lo(self) -> int:
        return I_LO

    @property
    def i_hi(self) -> int:
        return I_HI

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def key(self) -> tuple:
        return (self.m, self.d, self.mu, self.precision, self.k_lo, self.k_hi)

    def index(self, k: int, i: int) -> int:
        return (k - self.k_lo) * NODES_PER_OCTAVE + (i - I_LO)

    def covers(self, x_lo, x_hi) -> bool:
        lo = float(node_x(self.k_lo, I_LO)) * (1 - 1 / 64)
        hi = float(node_x(self.k_hi, I_HI)) * (1 + 1 / 64)
        return lo <= float(x_lo) and float(x_hi) <= hi

    @property
    def x_min(self) -> Fraction:
        return node_x(self.k_lo, I_LO) - Fraction(2) ** self.k_lo / 64

    @property
    def x_max(self) -> Fraction:
        return node_x(self.k_hi, I_HI) + Fraction(2) ** self.k_hi / 64

    def coefficient(self, k: int, i: int, r: int) -> mpf:
        return mpf(self.nodes[self.index(k, i)][r])

    def terms_for(self, bits: int) -> int:
        """Taylor terms needed so the dropped tail is below 2^-(bits+4) of each node's scale."""
        if ("T", bits) not in self._fixed:
            need = 1
            for node in self.nodes:
                tops = [raw[2] + raw[3] if raw[1] else None for raw in node]
                scale = max((t for t in tops if t is not None), default=None)
                if scale is None:
                    continue
                T = len(node)
                while T > 1 and (tops[T - 1] is None or tops[T - 1] < scale - bits - 10):
                    T -= 1
                need = max(need, T + 1)
            self._fixed[("T", bits)] = min(need, len(self.nodes[0]))
        return self._fixed[("T", bits)]

    def dd_tables(self):
        """(hi, lo) float64 arrays of shape (nodes, TAYLOR_TERMS)."""
        if self._dd is None:
            import numpy as np

            n = len(self.nodes)
            hi = np.zeros((n, TAYLOR_TERMS))
            lo = np.zeros((n, TAYLOR_TERMS))
            with mp.workprec(self.precision + 10):
                for a, node in enumerate(self.nodes):
                    for r, raw in enumerate(node):
                        v = mpf(raw)
                        h = float(v)
                        hi[a, r] = h
                        lo[a, r] = float(v - h)
            self._dd = (hi, lo)
        return self._dd

    def fixed_tables(self, bits: int):
        """Per node (exponent, [int mantissas]) with c_r = mant 2^exponent.

        The exponent is chosen so that the largest coefficient of the node
        has ``bits`` bits.
        """
        if bits not in self._fixed:
            out = []
            for node in self.nodes:
                top = max((raw[2] + raw[3] for raw in node if raw[1]), default=0)
                e = top - bits
                mants = []
                for sign, man, exp, bc in node:
                    v = man << (exp - e) if exp >= e else man >> (e - exp)
                    mants.append(-v if sign else v)
                out.append((e, mants))
            self._fixed[bits] = out
        return self._fixed[bits]


def _mpf_of(q: Fraction) -> mpf:
    return mpf(q.numerator) / q.denominator


def mesh_eval_flagged(mesh: MellinMesh, x, prec: int | None = None) -> tuple[mpf, bool]:
    """(value, negligible).  Beyond the last node F is taken to be zero, which
    the builder has certified (the mesh ends past the decay horizon)."""
    prec = min(mesh.precision, get_precision() if prec is None else prec)
    with mp.workprec(prec + 20):
        xv = mpf(x.numerator) / x.denominator if isinstance(x, Fraction) else mpf(x)
        if xv < _mpf_of(mesh.x_min):
            raise MeshRangeError(f"x={mp.nstr(xv, 8)} lies below the mesh")
        if xv > _mpf_of(mesh.x_max):
            return mpf(0), True
        k, i = nearest_node(xv)
        k = max(k, mesh.k_lo)
        if k > mesh.k_hi:
            k, i = mesh.k_hi, I_HI
        t = xv * mpf(2) ** (6 - k) - 2 * i
        node = mesh.nodes[mesh.index(k, i)]
        T = mesh.terms_for(prec)
        acc = mpf(node[T - 1])
        for r in range(T - 2, -1, -1):
            acc = acc * t + mpf(node[r])
    with mp.workprec(prec):
        return +acc, False


def mesh_eval(mesh: MellinMesh, x, prec: int | None = None) -> mpf:
    """F at x from the Taylor expansion about the nearest node."""
    return mesh_eval_flagged(mesh, x, prec)[0]


def _derivative_tables(res: ResidueData, R: int, K: int) -> list[list[list[mpf]]]:
    """Coefficients of x^r F^(r)(x) / r! as polynomials in (x, log x).

    Uses x^(r+1) F^(r+1) = sum_k x^k sum_j ((k - r) q_kj + (j + 1) q_k,j+1) L^j.
    """
    with mp.workprec(res.prec):
        cur = [list(res.q[k]) for k in range(K)]
        out = [cur]
        for r in range(R - 1):
            nxt = []
            for k in range(K):
                row = cur[k]
                J = len(row)
                nrow = []
                for j in range(J):
                    v = (k - r) * row[j]
                    if j + 1 < J:
                        v += (j + 1) * row[j + 1]
                    nrow.append(v / (r + 1))
                nxt.append(nrow)
            out.append(nxt)
            cur = nxt
    return out


def _to_fixed_rows(tables, K: int, R: int, wq: int):
    """Integer mantissas with one exponent per k (shared across r and j)."""
    sig = []
    ints = []
    with mp.workprec(wq + 32):
        for k in range(K):
            mags = [mp.mag(c) for r in range(R) for c in tables[r][k] if c]
            s = (max(mags) if mags else 0) - wq
            scale = mpf(2) ** (-s)
            sig.append(s)
            ints.append([[int(mp.nint(c * scale)) for c in tables[r][k]] for r in range(R)])
    return sig, ints


def _log2_int(n: int) -> int:
    return abs(n).bit_length()


def mesh_build(
    m: int,
    d: int,
    mu,
    k_range: tuple[int, int],
    prec: int | None = None,
) -> MellinMesh:
    """Taylor data on every node of the octaves k_range[0]..k_range[1].

    The coefficients are summed in integer fixed point at a width covering
    the residue series cancellation at the largest node; each node checks
    that its result kept ``prec + 16`` significant bits and is redone
    wider otherwise.
    """
    prec = get_precision() if prec is None else prec
    mu = Fraction(mu)
    k_lo, k_hi = k_range
    if k_hi < k_lo:
        raise ValueError("empty mesh range")
    R = TAYLOR_TERMS
    x_top = float(node_x(k_hi, I_HI))
    W = prec + _cancellation_guess(m, x_top) + 48
    nodes: list = [None] * ((k_hi - k_lo + 1) * NODES_PER_OCTAVE)
    todo = [(k, i) for k in range(k_lo, k_hi + 1) for i in range(I_LO, I_HI + 1)]
    for _attempt in range(5):
        redo = _build_nodes(m, d, mu, todo, W, prec, nodes, k_lo)
        if not redo:
            break
        todo = redo
        W = int(W * 1.5) + 32
    else:
        raise CancellationError("mesh nodes failed to reach the requested precision")
    return MellinMesh(m, d, mu, prec, k_lo, k_hi, nodes)


def _build_nodes(m, d, mu, todo, W, prec, nodes, k_lo) -> list:
    R = TAYLOR_TERMS
    x_top = max(float(node_x(k, i)) for k, i in todo)
    res = residue_data(m, d, mu, W + 16)
    # number of residues: sum at the largest node until terms die below 2^-W
    probe = _residue_sum(res, mpf(x_top), W)
    K = probe.terms + 4 + R  # derivatives shift the decay slightly
    res.ensure(K)
    tables = _derivative_tables(res, R, K)
    wq = W + 24
    sig, qints = _to_fixed_rows(tables, K, R, wq)
    J = max(len(row) for rows in qints for row in rows)
    qk = []
    for kk in range(K):
        mat = np.zeros((R, J), dtype=object)
        for r in range(R):
            row = qints[kk][r]
            mat[r, : len(row)] = row
        qk.append(mat)
    redo = []
    wl = W + 32
    for k, i in todo:
        e = k - 5  # x0 = i 2^e
        with mp.workprec(wl + 32):
            L = mp.log(mpf(i) * mpf(2) ** e)
            Lf = [1 << wl]
            Lf_mp = mpf(1)
            for j in range(1, J):
                Lf_mp *= L
                Lf.append(int(mp.nint(Lf_mp * mpf(2) ** (wl))))
        Lvec = np.array(Lf, dtype=object)
        # |term_k| < 2^bound_k for every r; term_k = (sum_j Q[r][k][j] Lf_j) x0^k 2^(sig_k - wl)
        lg = math.log2(float(i)) + e
        lb = (J - 1) * max(0.0, math.log2(max(abs(float(L)), 1e-300)))
        bound = [sig[kk] + wq + lb + kk * lg + 2 for kk in range(K)]
        U = int(max(bound)) - W
        acc = np.zeros(R, dtype=object)
        ik = 1
        for kk in range(K):
            if kk:
                ik *= i
            if bound[kk] < U - 16:
                continue
            col = qk[kk].dot(Lvec) * ik
            sh = sig[kk] + kk * e - wl - U
            acc += np.left_shift(col, sh) if sh >= 0 else np.right_shift(col, -sh)
        coeffs = []
        for r in range(R):
            # c_r = x0^r F^(r) / r! * (1/(2i))^r
            den = (2 * i) ** r
            v = int(acc[r])
            coeffs.append((v + (den >> 1)) // den)
        kept = _log2_int(coeffs[0]) if coeffs[0] else 0
        if kept < prec + 16:
            redo.append((k, i))
            continue
        raws = []
        for c in coeffs:
            raws.append(from_man_exp(c, U, prec, "n"))
        nodes[(k - k_lo) * NODES_PER_OCTAVE + (i - I_LO)] = tuple(raws)
    return redo


# ---------------------------------------------------------------- mesh files


def _write_mesh(mesh: MellinMesh, path) -> None:
    width = (mesh.precision + 7) // 8
    buf = bytearray()
    buf += MESH_MAGIC
    buf += struct.pack(
        "<HHHiiHHHiiI",
        mesh.version,
        mesh.m,
        mesh.d,
        mesh.mu.numerator,
        mesh.mu.denominator,
        mesh.precision,
        I_LO,
        I_HI,
        mesh.k_lo,
        mesh.k_hi,
        len(mesh.nodes),
    )
    for node in mesh.nodes:
        for sign, man, exp, bc in node:
            if man == 0:
                buf += struct.pack("<bi", 0, 0) + bytes(width)
                continue
            shift = mesh.precision - bc
            buf += struct.pack("<bi", -1 if sign else 1, exp - shift)
            buf += (man << shift).to_bytes(width, "little")
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    tmp = Path(f"{path}.{os.getpid()}.tmp")
    tmp.write_bytes(bytes(buf))
    os.replace(tmp, path)


def _read_mesh(path) -> MellinMesh:
    data = Path(path).read_bytes()
    if len(data) < 10 or data[:6] != MESH_MAGIC:
        raise MeshFormatError(f"{path}: not a mesh file")
    body, tail = data[:-4], data[-4:]
    if struct.unpack("<I", tail)[0] != zlib.crc32(body) & 0xFFFFFFFF:
        raise MeshFormatError(f"{path}: checksum mismatch")
    head = struct.Struct("<HHHiiHHHiiI")
    (version, m, d, mun, mud, precision, ilo, ihi, k_lo, k_hi, count) = head.unpack_from(body, 6)
    if version != MESH_VERSION:
        raise MeshFormatError(f"{path}: unsupported mesh version {version}")
    if (ilo, ihi) != (I_LO, I_HI) or count != (k_hi - k_lo + 1) * NODES_PER_OCTAVE:
        raise MeshFormatError(f"{path}: inconsistent grid header")
    width = (precision + 7) // 8
    pos = 6 + head.size
    nodes = []
    for _ in range(count):
        node = []
        for _r in range(TAYLOR_TERMS):
            sign, exp = struct.unpack_from("<bi", body, pos)
            pos += 5
            man = int.from_bytes(body[pos : pos + width], "little")
            pos += width
            if sign == 0:
                node.append((0, 0, 0, 0))
            else:
                node.append(from_man_exp(-man if sign < 0 else man, exp, precision, "n"))
        nodes.append(tuple(node))
    if pos != len(body):
        raise MeshFormatError(f"{path}: trailing bytes")
    return MellinMesh(m, d, Fraction(mun, mud), precision, k_lo, k_hi, nodes, version)


def mesh_filename(m: int, d: int, mu, precision: int, k_lo: int, k_hi: int) -> str:
    mu = Fraction(mu)
    mus = f"{mu.numerator}" if mu.denominator == 1 else f"{mu.numerator}_{mu.denominator}"
    return f"F_m{m}_d{d}_mu{mus}_p{precision}_k{k_lo}_{k_hi}.mesh"


def mesh_verify(mesh: MellinMesh, samples: int = 8, prec: int | None = None) -> float:
    """Largest relative disagreement (log2) between adjacent nodes at shared
    midpoints and against direct residue sums at a few nodes."""
    prec = min(mesh.precision, get_precision() if prec is None else prec)
    worst = -math.inf
    step = max(1, (len(mesh.nodes) - 1) // max(samples, 1))
    for a in range(0, len(mesh.nodes) - 1, step):
        k = mesh.k_lo + a // NODES_PER_OCTAVE
        i = I_LO + a % NODES_PER_OCTAVE
        with mp.workprec(prec + 20):
            x0 = mpf(i) * mpf(2) ** (k - 5)
            nxt = (k, i + 1) if i < I_HI else (k + 1, I_LO)
            if nxt[0] > mesh.k_hi:
                continue
            x1 = mpf(nxt[1]) * mpf(2) ** (nxt[0] - 5)
            mid = (x0 + x1) / 2
            T = mesh.terms_for(prec)
            vals = []
            for (kk, ii), x in (((k, i), mid), (nxt, mid)):
                node = mesh.nodes[mesh.index(kk, ii)]
                t = mid * mpf(2) ** (6 - kk) - 2 * ii
                acc = mpf(node[T - 1])
                for r in range(T - 2, -1, -1):
                    acc = acc * t + mpf(node[r])
                vals.append(acc)
            scale = max(abs(vals[0]), abs(vals[1]))
            if scale:
                diff = abs(vals[0] - vals[1]) / scale
                worst = max(worst, float(mp.log(diff, 2)) if diff else -float(prec + 20))
    return worst


class MeshStore:
    """In-memory and on-disk cache of meshes keyed by (m, d, mu, precision, grid).

    ``get`` returns a mesh covering [x_lo, x_hi] with at least the requested
    precision, building (and saving, when a directory is set) if needed.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory else None
        self._meshes: dict[tuple, MellinMesh] = {}
        self.builds = 0

    def _candidates(self, m, d, mu):
        for key, mesh in self._meshes.items():
            if key[:3] == (m, d, mu):
                yield mesh
        if self.directory and self.directory.is_dir():
            mus = f"{mu.numerator}" if mu.denominator == 1 else f"{mu.numerator}_{mu.denominator}"
            for path in sorted(self.directory.glob(f"F_m{m}_d{d}_mu{mus}_p*.mesh")):
                try:
                    mesh = _read_mesh(path)
                except MeshFormatError:
                    continue
                self._meshes[mesh.key()] = mesh
                yield mesh

    def get(self, m: int, d: int, mu, x_lo, x_hi, prec: int) -> MellinMesh:
        mu = Fraction(mu)
        k_lo = nearest_node(x_lo)[0] - 1
        k_hi = nearest_node(x_hi)[0]
        best = None
        for mesh in list(self._candidates(m, d, mu)):
            if mesh.precision >= prec and mesh.k_lo <= k_lo and mesh.k_hi >= k_hi:
                if best is None or (mesh.precision, mesh.node_count) < (best.precision, best.node_count):
                    best = mesh
        if best is not None:
            return best
        # widen to a previous mesh of the same kind so caches do not fragment
        for mesh in self._meshes.values():
            if mesh.key()[:3] == (m, d, mu) and mesh.precision >= prec:
                k_lo, k_hi = min(k_lo, mesh.k_lo), max(k_hi, mesh.k_hi)
        mesh = mesh_build(m, d, mu, (k_lo, k_hi), prec)
        self.builds += 1
        self._meshes[mesh.key()] = mesh
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
            _write_mesh(mesh, self.directory / mesh_filename(*mesh.key()))
        return mesh

    def add(self, mesh: MellinMesh) -> None:
        self._meshes[mesh.key()] = mesh


write_mesh = _write_mesh
read_mesh = _read_mesh
