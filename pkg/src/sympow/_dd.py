"""Double-double kernels for the bulk sums.

A double-double is an unevaluated pair (hi, lo) with |lo| <= ulp(hi)/2,
giving about 104 bits.  The error-free transformations are the usual
Knuth two-sum and Dekker two-product (no FMA is assumed).  These kernels
serve accuracy targets up to roughly 90 bits; beyond that the engine
switches to integer fixed point.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_SPLITTER = 134217729.0  # 2^27 + 1


@nb.njit(cache=True, inline="always")
def two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@nb.njit(cache=True, inline="always")
def quick_two_sum(a, b):
    s = a + b
    return s, b - (s - a)


@nb.njit(cache=True, inline="always")
def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


@nb.njit(cache=True, inline="always")
def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@nb.njit(cache=True, inline="always")
def dd_add(ah, al, bh, bl):
    s, e = two_sum(ah, bh)
    t, f = two_sum(al, bl)
    e += t
    s, e = quick_two_sum(s, e)
    e += f
    return quick_two_sum(s, e)


@nb.njit(cache=True, inline="always")
def dd_add_d(ah, al, b):
    s, e = two_sum(ah, b)
    e += al
    return quick_two_sum(s, e)


@nb.njit(cache=True, inline="always")
def dd_mul(ah, al, bh, bl):
    p, e = two_prod(ah, bh)
    e += ah * bl + al * bh
    return quick_two_sum(p, e)


@nb.njit(cache=True, inline="always")
def dd_mul_d(ah, al, b):
    p, e = two_prod(ah, b)
    e += al * b
    return quick_two_sum(p, e)


@nb.njit(cache=True)
def dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = dd_mul_d(bh, bl, q1)
    rh, rl = dd_add(ah, al, -ph, -pl)
    q2 = rh / bh
    ph, pl = dd_mul_d(bh, bl, q2)
    rh, rl = dd_add(rh, rl, -ph, -pl)
    q3 = rh / bh
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add_d(q1, q2, q3)


@nb.njit(cache=True)
def dd_sqrt(ah, al):
    if ah <= 0.0:
        return 0.0, 0.0
    x = 1.0 / math.sqrt(ah)
    ax = ah * x
    sh, sl = two_prod(ax, ax)
    dh, dl = dd_add(ah, al, -sh, -sl)
    return two_sum(ax, dh * (x * 0.5))


# ------------------------------------------------------------- coefficients


@nb.njit(cache=True)
def normalized_good_traces(m, ap, primes, out_hi, out_lo):
    """c(p) = trace of Sym^m at a_p / sqrt(p), i.e. U_m(a_p / (2 sqrt p))."""
    for a in range(primes.shape[0]):
        sh, sl = dd_sqrt(float(primes[a]), 0.0)
        th, tl = dd_div(float(ap[a]), 0.0, sh, sl)
        # s_{k+1} = t s_k - s_{k-1}
        ph, pl = 1.0, 0.0
        ch, cl = th, tl
        if m == 0:
            ch, cl = 1.0, 0.0
        for _ in range(1, m):
            nh, nl = dd_mul(th, tl, ch, cl)
            nh, nl = dd_add(nh, nl, -ph, -pl)
            ph, pl = ch, cl
            ch, cl = nh, nl
        out_hi[a] = ch
        out_lo[a] = cl


@nb.njit(cache=True)
def block_coefficients(lo, hi, small, small_off, tab_hi, tab_lo, primes, cp_hi, cp_lo, out_hi, out_lo):
    """Normalised Dirichlet coefficients c(n) for lo <= n < hi.

    ``small`` lists every prime up to sqrt(n_max); c(p^e) for those sits at
    tab[small_off[a] + e - 1].  Whatever is left after dividing them out is
    1 or a single prime, looked up in ``primes``/``cp``.
    """
    n = hi - lo
    rem = np.empty(n, dtype=np.int64)
    for j in range(n):
        rem[j] = lo + j
        out_hi[j] = 1.0
        out_lo[j] = 0.0
    for a in range(small.shape[0]):
        p = small[a]
        start = ((lo + p - 1) // p) * p
        for v in range(start, hi, p):
            j = v - lo
            r = rem[j]
            e = 0
            while r % p == 0:
                r //= p
                e += 1
            rem[j] = r
            t = small_off[a] + e - 1
            out_hi[j], out_lo[j] = dd_mul(out_hi[j], out_lo[j], tab_hi[t], tab_lo[t])
    for j in range(n):
        r = rem[j]
        if r > 1:
            b = np.searchsorted(primes, r)
            out_hi[j], out_lo[j] = dd_mul(out_hi[j], out_lo[j], cp_hi[b], cp_lo[b])


# ------------------------------------------------------------- mesh sums


@nb.njit(cache=True)
def weighted_sums(
    lo,
    hi,
    c_hi,
    c_lo,
    wkind,
    scale_hi,
    scale_lo,
    n_last,
    node_off,
    k_lo,
    k_hi,
    T,
    mesh_hi,
    mesh_lo,
    block,
    out_hi,
    out_lo,
):
    """For each requested sum s: partial sums over blocks of sum_n c(n) w_s(n) F_s(n scale_s).

    w_s(n) is 1, 1/n or 1/sqrt(n) for wkind 0, 1, 2.  F_s is evaluated from
    the Taylor mesh rows node_off[s] + (k - k_lo[s]) 32 + (i - 32).  Terms
    with n > n_last[s] are skipped.  Returns -1, or the first n whose
    argument fell below its mesh.
    """
    S = wkind.shape[0]
    bad = -1
    for j in range(hi - lo):
        nn = lo + j
        b = j // block
        ch = c_hi[j]
        cl = c_lo[j]
        if ch == 0.0:
            continue
        fn = float(nn)
        for s in range(S):
            if nn > n_last[s]:
                continue
            xh, xl = dd_mul_d(scale_hi[s], scale_lo[s], fn)
            mant, ex = math.frexp(xh)
            k = ex - 1
            i = int(math.floor(mant * 64.0 + 0.5))
            if i == 64:
                k += 1
                i = 32
            if k < k_lo[s]:
                if bad < 0:
                    bad = nn
                continue
            if k > k_hi[s]:
                continue
            row = node_off[s] + (k - k_lo[s]) * 32 + (i - 32)
            f = 2.0 ** (6 - k)
            th, tl = two_sum(xh * f, -2.0 * i)
            tl += xl * f
            th, tl = quick_two_sum(th, tl)
            Ts = T[s]
            ah = mesh_hi[row, Ts - 1]
            al = mesh_lo[row, Ts - 1]
            for r in range(Ts - 2, -1, -1):
                ah, al = dd_mul(ah, al, th, tl)
                ah, al = dd_add(ah, al, mesh_hi[row, r], mesh_lo[row, r])
            wh, wl = ch, cl
            if wkind[s] == 1:
                wh, wl = dd_div(wh, wl, fn, 0.0)
            elif wkind[s] == 2:
                qh, ql = dd_sqrt(fn, 0.0)
                wh, wl = dd_div(wh, wl, qh, ql)
            ah, al = dd_mul(ah, al, wh, wl)
            out_hi[s, b], out_lo[s, b] = dd_add(out_hi[s, b], out_lo[s, b], ah, al)
    return bad


def split_dd(values) -> tuple[np.ndarray, np.ndarray]:
    """mpf (or int/Fraction) sequence to hi/lo float arrays."""
    from mpmath import mp, mpf

    hi = np.empty(len(values))
    lo = np.empty(len(values))
    with mp.workprec(160):
        for a, v in enumerate(values):
            v = mpf(v)
            h = float(v)
            hi[a] = h
            lo[a] = float(v - h)
    return hi, lo
