import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from sympow.curves import CMCurveError, EllipticCurve, parse_curve
from sympow.lseries import (
    TermCapError,
    coefficients,
    global_conductor,
    global_ldata,
    prime_power_coefficients,
    scale_constant,
    sign_theoretical,
    w_infinity,
)
from sympow.local import euler_factor

E11 = parse_curve("0,-1,1,0,0")
E37 = parse_curve("0,0,1,-1,0")
E40 = parse_curve("0,0,0,-7,-6")

# q-expansion of the weight 2 newform of level 11
A11 = [1, -2, -1, 2, 1, 2, -2, 0, -2, -2, 1, -2, 4, 4, -1, -4, -2, 4, 0, 2]


def _primes(n):
    return [p for p in range(2, n + 1) if all(p % q for q in range(2, math.isqrt(p) + 1))]


def naive_coefficients(curve, m, n_max):
    """Dirichlet coefficients by multiplying out each Euler factor 1/P_p(p^-s)."""
    out = [0] * (n_max + 1)
    out[1] = 1
    for p in _primes(n_max):
        e_max = int(math.log(n_max, p)) + 1
        local = prime_power_coefficients(curve, m, p, e_max)
        new = [0] * (n_max + 1)
        for n in range(1, n_max + 1):
            if out[n] == 0:
                continue
            q, e = n, 0
            while q <= n_max and e < len(local):
                new[q] += out[n] * local[e]
                q *= p
                e += 1
        out = new
    return out[1:]


def test_m1_coefficients_are_the_newform():
    assert coefficients(global_ldata(E11, 1), 20) == A11


@pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
def test_coefficients_match_euler_product(m):
    assert coefficients(global_ldata(E11, m), 300) == naive_coefficients(E11, m, 300)


def test_coefficients_additive_curve():
    assert coefficients(global_ldata(E40, 3), 200) == naive_coefficients(E40, 3, 200)


def test_sym2_at_good_primes():
    b = coefficients(global_ldata(E37, 2), 100)
    for p in _primes(100):
        if p != 37:
            assert b[p - 1] == E37.ap(p) ** 2 - p


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 400), st.integers(1, 400), st.integers(1, 4))
def test_multiplicative(a, b, m):
    if math.gcd(a, b) != 1:
        return
    c = coefficients(global_ldata(E37, m), 400 * 400 if a * b > 400 else 400)
    assert c[a * b - 1] == c[a - 1] * c[b - 1]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 5000), st.integers(1, 7))
def test_dd_block_matches_exact(lo, m):
    g = global_ldata(E11, m)
    hi = lo + 64
    exact = g.block_exact(lo, hi, 6000)
    h, l = g.block_dd(lo, hi, 6000)
    with mp.workprec(160):
        for j, n in enumerate(range(lo, hi)):
            want = mpf(int(exact[j])) / mpf(n) ** (mpf(m) / 2)
            got = mpf(float(h[j])) + mpf(float(l[j]))
            assert abs(got - want) <= mpf(2) ** -98 * max(1, abs(want))


def test_exact_block_offsets_consistent():
    g = global_ldata(E37, 3)
    whole = list(g.block_exact(1, 2001, 2000))
    parts = list(g.block_exact(1, 777, 2000)) + list(g.block_exact(777, 2001, 2000))
    assert whole == parts


@pytest.mark.parametrize("m", range(1, 10))
def test_semistable_conductor(m):
    assert global_conductor(E11, m) == 11**m
    assert global_conductor(E37, m) == 37**m


def test_conductor_with_wild_part():
    assert global_conductor(E40, 9) == 2**15 * 5**9


def test_cm_rejected():
    E = EllipticCurve.from_ainvs((0, 0, 0, -1, 0), allow_cm=True)
    with pytest.raises(CMCurveError):
        global_conductor(E, 3)


def test_scale_constant():
    with mp.workprec(100):
        assert abs(scale_constant(11, 1, 100) - mp.sqrt(mpf(11)) / (2 * mp.pi)) < mpf(2) ** -90
        want = mp.sqrt(2 * mpf(121) / (2 * mp.pi) ** 3)
        assert abs(scale_constant(121, 2, 100) - want) < mpf(2) ** -90


def test_evaluation_point():
    g = global_ldata(E11, 3)
    assert (g.kappa, g.lam) == (2, 2)
    g = global_ldata(E11, 4)
    assert (g.kappa, g.lam) == (3, 2)


@pytest.mark.parametrize("m,w", [(1, -1), (3, -1), (5, 1), (7, 1), (9, -1)])
def test_w_infinity(m, w):
    assert w_infinity(m) == w


def test_theoretical_signs_semistable():
    assert sign_theoretical(E11, 1).theoretical == 1
    assert sign_theoretical(E37, 1).theoretical == -1
    rep = sign_theoretical(E11, 3)
    assert not rep.conjectural and rep.theoretical in (1, -1)
    assert sign_theoretical(E11, 4).theoretical == 1


def test_sign_at_3_flagged_conjectural():
    rep = sign_theoretical(parse_curve("1,-1,1,1,-1"), 3)  # 54b1
    assert rep.conjectural


def test_term_cap():
    with pytest.raises(TermCapError):
        coefficients(global_ldata(E11, 1), 10**9)


def test_euler_factor_11a3_m2_p3():
    assert prime_power_coefficients(E11, 2, 3, 1) == [1, -2]
    assert str(euler_factor(E11, 3, 1)) == "1 + T + 3T^2"
