import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from sympow.numerics import (
    GammaPoleError,
    PrecisionError,
    RecognitionError,
    TruncatedSeries,
    agm,
    format_factorization,
    gamma_eval,
    get_precision,
    harmonic_H,
    rational_recognize,
    set_precision,
    zeta_const,
)


def close(a, b, bits):
    return abs(a - b) <= mpf(2) ** (-bits) * max(1, abs(b))


def test_default_precision_is_212():
    assert get_precision() == 212


def test_precision_bounds():
    with pytest.raises(PrecisionError):
        set_precision(32)
    with pytest.raises(PrecisionError):
        set_precision(300)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_gamma_integers(n):
    assert gamma_eval(n) == math.factorial(n - 1)


def test_gamma_half():
    with mp.workprec(240):
        assert close(gamma_eval(Fraction(1, 2)), mp.sqrt(mp.pi), 205)


@pytest.mark.parametrize("z", [0, -1, -7])
def test_gamma_pole(z):
    with pytest.raises(GammaPoleError):
        gamma_eval(z)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 10), max_value=Fraction(9, 10), max_denominator=50))
def test_gamma_reflection(x):
    with mp.workprec(240):
        xf = mpf(x.numerator) / x.denominator
        lhs = gamma_eval(xf) * gamma_eval(1 - xf)
        assert close(lhs, mp.pi / mp.sin(mp.pi * xf), 200)


@settings(max_examples=40, deadline=None)
@given(st.fractions(min_value=Fraction(1, 4), max_value=Fraction(20), max_denominator=30))
def test_gamma_duplication(x):
    # Gamma(z/2) = Gamma(z) sqrt(pi) 2^(1-z) / Gamma((z+1)/2)
    with mp.workprec(240):
        z = mpf(x.numerator) / x.denominator
        lhs = gamma_eval(z / 2)
        rhs = gamma_eval(z) * mp.sqrt(mp.pi) * mpf(2) ** (1 - z) / gamma_eval((z + 1) / 2)
        assert close(lhs, rhs, 200)


def test_zeta_constants():
    with mp.workprec(240):
        assert close(zeta_const(1), mp.euler, 205)
        assert close(zeta_const(2), mp.pi**2 / 6, 205)
        # Euler-Maclaurin oracle at lower precision
        em = mpmath.nsum(lambda k: 1 / k**3, [1, mpmath.inf], method="euler-maclaurin")
        assert close(zeta_const(3), em, 45)
        assert mp.nstr(zeta_const(3), 11) == "1.2020569032"


def test_agm():
    with mp.workprec(240):
        assert close(agm(1, 1), mpf(1), 210)
        # Gauss's constant
        g = 1 / agm(1, mp.sqrt(2))
        assert mp.nstr(g, 11) == "0.83462684167"
    with pytest.raises(ValueError):
        agm(-1, 2)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100))
def test_agm_symmetric_and_between(a, b):
    m1 = agm(a, b, 80)
    m2 = agm(b, a, 80)
    assert close(m1, m2, 70)
    assert min(a, b) * (1 - 1e-12) <= m1 <= max(a, b) * (1 + 1e-12)


def _h_direct(k, n):
    # sum over 1 <= i_1 <= ... <= i_n <= k of 1/(i_1 ... i_n)
    if n == 0:
        return Fraction(1)
    total = Fraction(0)

    def rec(start, left, acc):
        nonlocal total
        if left == 0:
            total += acc
            return
        for i in range(start, k + 1):
            rec(i, left - 1, acc / i)

    rec(1, n, Fraction(1))
    return total


@pytest.mark.parametrize("k,n", [(1, 1), (2, 1), (2, 2), (3, 2), (4, 3), (5, 0), (0, 3)])
def test_harmonic_H_small(k, n):
    assert harmonic_H(k, n) == _h_direct(k, n)


def test_harmonic_H_first_order_is_harmonic_number():
    for k in range(1, 15):
        assert harmonic_H(k, 1) == sum(Fraction(1, i) for i in range(1, k + 1))


def test_series_multiplication_and_inverse():
    with mp.workprec(120):
        a = TruncatedSeries([mpf(1), mpf(2), mpf(3), mpf(4)])
        inv = a.inverse()
        prod = a * inv
        assert close(prod.coefficient(0), mpf(1), 110)
        for n in range(1, 4):
            assert abs(prod.coefficient(n)) < mpf(2) ** -110


def test_series_exp_matches_mpmath():
    with mp.workprec(120):
        s = TruncatedSeries([mpf(0), mpf(1), mpf(0), mpf(0), mpf(0), mpf(0)]).exp()
        for n in range(6):
            assert close(s.coefficient(n), 1 / mpf(math.factorial(n)), 110)


def test_series_pole_order_and_residue():
    with mp.workprec(80):
        s = TruncatedSeries([mpf(2), mpf(5)], -1)
        assert s.pole_order == 1
        assert s.residue() == 2
        t = s * s
        assert t.pole_order == 2
        # truncation: (2/w + 5)^2 known up to w^-1 only
        assert t.order == 0


@settings(max_examples=50, deadline=None)
@given(st.fractions(min_value=Fraction(-10**6), max_value=Fraction(10**6), max_denominator=997))
def test_rational_recognize_roundtrip(q):
    with mp.workprec(120):
        x = mpf(q.numerator) / q.denominator
        assert rational_recognize(x, max_den=1000, prec=100).value == q


def test_rational_recognize_units():
    with mp.workprec(120):
        r = rational_recognize(mpmath.mpc(0, 80), unit_slack=True, prec=100)
        assert r.value == 80 and r.unit in (1j, -1j)
        r = rational_recognize(mpf(-80), unit_slack=True, prec=100)
        assert r.value == 80 and r.unit == -1


def test_rational_recognize_failure():
    with mp.workprec(120):
        with pytest.raises(RecognitionError):
            rational_recognize(mp.pi, max_den=1000, prec=100)


@pytest.mark.parametrize(
    "q,s",
    [(Fraction(80), "2^4*5"), (Fraction(2**17, 3), "2^17/3"), (Fraction(0), "0"), (Fraction(-1536), "-2^9*3")],
)
def test_format_factorization(q, s):
    assert format_factorization(q) == s
