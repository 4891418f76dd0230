"""Compiled point counting for many primes at once.

Small primes are counted directly; larger ones use baby-step giant-step on
y^2 = x^3 + Ax + B and its quadratic twist (Mestre's trick), which pins
down a_p as soon as the known point orders leave a single candidate in
the Hasse interval.  Everything is deterministic: the pseudo-random points
come from a fixed linear congruential generator seeded by p.
"""

from __future__ import annotations

import numba as nb
import numpy as np

NAIVE_BOUND = 400
FAILED = -(1 << 40)


@nb.njit(cache=True)
def _powmod(a, e, p):
    r = 1
    a %= p
    while e > 0:
        if e & 1:
            r = (r * a) % p
        a = (a * a) % p
        e >>= 1
    return r


@nb.njit(cache=True)
def _inv(a, p):
    t, newt = 0, 1
    r, newr = p, a % p
    while newr != 0:
        q = r // newr
        t, newt = newt, t - q * newt
        r, newr = newr, r - q * newr
    if t < 0:
        t += p
    return t


@nb.njit(cache=True)
def _add(x1, y1, o1, x2, y2, o2, A, p):
    if o1:
        return x2, y2, o2
    if o2:
        return x1, y1, o1
    if x1 == x2:
        if (y1 + y2) % p == 0:
            return 0, 0, True
        lam = ((3 * x1 % p * x1 + A) % p) * _inv(2 * y1 % p, p) % p
    else:
        lam = ((y2 - y1) % p) * _inv((x2 - x1) % p, p) % p
    x3 = (lam * lam - x1 - x2) % p
    y3 = (lam * ((x1 - x3) % p) - y1) % p
    return x3, y3, False


@nb.njit(cache=True)
def _mul(n, x, y, A, p):
    rx, ry, ro = 0, 0, True
    bx, by, bo = x, y, False
    while n > 0:
        if n & 1:
            rx, ry, ro = _add(rx, ry, ro, bx, by, bo, A, p)
        bx, by, bo = _add(bx, by, bo, bx, by, bo, A, p)
        n >>= 1
    return rx, ry, ro


@nb.njit(cache=True)
def _isqrt(n):
    r = np.int64(np.sqrt(np.float64(n)))
    while r * r > n:
        r -= 1
    while (r + 1) * (r + 1) <= n:
        r += 1
    return r


@nb.njit(cache=True)
def _killing_multiple(x, y, A, p, lo, hi):
    """Some N in [lo, hi] with N*P = O, or -1."""
    width = hi - lo
    m = _isqrt(width // 2) + 1
    bx = np.empty(m + 1, dtype=np.int64)
    by = np.empty(m + 1, dtype=np.int64)
    cx, cy, co = 0, 0, True
    for j in range(1, m + 1):
        cx, cy, co = _add(cx, cy, co, x, y, False, A, p)
        if co:
            n0 = ((lo + j - 1) // j) * j
            return n0
        bx[j] = cx
        by[j] = cy
    bx[0] = -1
    by[0] = -1
    order = np.argsort(bx)
    sx = bx[order]
    step = 2 * m + 1
    sxp, syp, sop = _mul(step, x, y, A, p)
    c = lo + m
    qx, qy, qo = _mul(c, x, y, A, p)
    while c - m <= hi:
        if qo:
            if lo <= c <= hi:
                return c
        else:
            k = np.searchsorted(sx, qx)
            while k < sx.shape[0] and sx[k] == qx:
                j = order[k]
                for cand in (c - j, c + j):
                    if lo <= cand <= hi:
                        tx, ty, to = _mul(cand, x, y, A, p)
                        if to:
                            return cand
                k += 1
        qx, qy, qo = _add(qx, qy, qo, sxp, syp, sop, A, p)
        c += step
    return -1


@nb.njit(cache=True)
def _unique_multiple(x, y, A, p, lo, hi):
    """The N in [lo, hi] with N*P = O when there is exactly one, else -1.

    One full baby-step giant-step sweep; a y-coordinate comparison decides
    between c - j and c + j, so no scalar multiplication is needed.
    """
    width = hi - lo
    m = _isqrt(width // 2) + 1
    bx = np.empty(m, dtype=np.int64)
    by = np.empty(m, dtype=np.int64)
    cx, cy, co = 0, 0, True
    for j in range(1, m + 1):
        cx, cy, co = _add(cx, cy, co, x, y, False, A, p)
        if co:
            return -1  # order <= m, far too small to pin N down
        bx[j - 1] = cx
        by[j - 1] = cy
    order = np.argsort(bx)
    sx = bx[order]
    step = 2 * m + 1
    sxp, syp, sop = _mul(step, x, y, A, p)
    c = lo + m
    qx, qy, qo = _mul(c, x, y, A, p)
    found = -1
    count = 0
    while c - m <= hi:
        if qo:
            if lo <= c <= hi:
                found = c
                count += 1
        else:
            k = np.searchsorted(sx, qx)
            while k < sx.shape[0] and sx[k] == qx:
                j = order[k] + 1
                yj = by[order[k]]
                if yj == qy:
                    cand = c - j
                    if lo <= cand <= hi:
                        found = cand
                        count += 1
                if (yj + qy) % p == 0:
                    cand = c + j
                    if lo <= cand <= hi:
                        found = cand
                        count += 1
                k += 1
        if count > 1:
            return -1
        qx, qy, qo = _add(qx, qy, qo, sxp, syp, sop, A, p)
        c += step
    return found if count == 1 else -1


@nb.njit(cache=True)
def _point_order(x, y, A, p, n, small):
    """Exact order of P given a multiple n of it; ``small`` holds primes up to sqrt(n)."""
    order = n
    rest = n
    for i in range(small.shape[0]):
        q = small[i]
        if q * q > rest:
            break
        if rest % q == 0:
            while rest % q == 0:
                rest //= q
            while order % q == 0:
                tx, ty, to = _mul(order // q, x, y, A, p)
                if to:
                    order //= q
                else:
                    break
    if rest > 1:
        q = rest
        if order % q == 0:
            tx, ty, to = _mul(order // q, x, y, A, p)
            if to:
                order //= q
    return order


@nb.njit(cache=True)
def _gcd(a, b):
    while b:
        a, b = b, a % b
    return a


@nb.njit(cache=True)
def _ap_naive(A, B, p):
    s = 0
    half = (p - 1) // 2
    for x in range(p):
        v = ((x * x % p) * x + A * x + B) % p
        if v != 0:
            if _powmod(v, half, p) == 1:
                s += 1
            else:
                s -= 1
    return -s


@nb.njit(cache=True)
def _ap_bsgs(A, B, p, small):
    r = _isqrt(4 * p)
    lo = p + 1 - r
    hi = p + 1 + r
    le = 1
    lt = 1
    state = (p * 2862933555777941757 + 3037000493) & 0x7FFFFFFFFFFFFFFF
    half = (p - 1) // 2
    for _ in range(400):
        state = (state * 6364136223846793005 + 1442695040888963407) & 0x7FFFFFFFFFFFFFFF
        x0 = (state >> 17) % p
        v = ((x0 * x0 % p) * x0 + A * x0 + B) % p
        if v == 0:
            continue
        chi = 1 if _powmod(v, half, p) == 1 else -1
        v2 = v * v % p
        a2 = A * v2 % p
        px = x0 * v % p
        py = v2
        u = _unique_multiple(px, py, a2, p, lo, hi)
        if u > 0:
            return p + 1 - u if chi == 1 else u - p - 1
        n0 = _killing_multiple(px, py, a2, p, lo, hi)
        if n0 <= 0:
            continue
        o = _point_order(px, py, a2, p, n0, small)
        if chi == 1:
            le = le // _gcd(le, o) * o
        else:
            lt = lt // _gcd(lt, o) * o
        count = 0
        cand = 0
        if le >= lt:
            start = ((lo + le - 1) // le) * le
            n = start
            while n <= hi:
                a = p + 1 - n
                if (p + 1 + a) % lt == 0:
                    count += 1
                    cand = a
                n += le
        else:
            start = ((lo + lt - 1) // lt) * lt
            n = start
            while n <= hi:
                a = n - p - 1
                if (p + 1 - a) % le == 0:
                    count += 1
                    cand = a
                n += lt
        if count == 1:
            return cand
    return FAILED


@nb.njit(cache=True)
def ap_many(amod, bmod, primes, small):
    """a_p for y^2 = x^3 + A x + B at each prime (all p >= 5, good reduction)."""
    out = np.empty(primes.shape[0], dtype=np.int64)
    for i in range(primes.shape[0]):
        p = primes[i]
        if p < NAIVE_BOUND:
            out[i] = _ap_naive(amod[i], bmod[i], p)
        else:
            out[i] = _ap_bsgs(amod[i], bmod[i], p, small)
    return out


def prime_sieve(n: int) -> np.ndarray:
    """Primes <= n as int64."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    s = np.ones(n + 1, dtype=bool)
    s[:2] = False
    s[4::2] = False
    for p in range(3, int(n**0.5) + 1, 2):
        if s[p]:
            s[p * p :: 2 * p] = False
    return np.nonzero(s)[0].astype(np.int64)


def residues(value: int, primes: np.ndarray) -> np.ndarray:
    if abs(value) < 2**62:
        return np.mod(np.int64(value), primes)
    return np.array([value % int(p) for p in primes], dtype=np.int64)


def traces_of_frobenius(c4: int, c6: int, primes: np.ndarray) -> np.ndarray:
    """a_p for the curve with invariants c4, c6 at primes p >= 5 of good reduction."""
    primes = np.asarray(primes, dtype=np.int64)
    amod = residues(-27 * c4, primes)
    bmod = residues(-54 * c6, primes)
    top = int(primes.max()) if primes.size else 5
    small = prime_sieve(int((top + 2 * top**0.5 + 2) ** 0.5) + 2)
    out = ap_many(amod, bmod, primes, small)
    bad = np.nonzero(out == FAILED)[0]
    for i in bad:
        p = int(primes[i])
        out[i] = _ap_naive(int(amod[i]), int(bmod[i]), p)
    return out
