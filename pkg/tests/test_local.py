import cmath
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpc, mpf

from sympow.curves import EllipticCurve, WeierstrassModel, minimal_twist_at, parse_curve
from sympow.local import (
    InertiaGroup,
    LocalKind,
    abelian_euler_poly,
    beta,
    beta_oracle,
    epsilon,
    euler_factor,
    euler_poly_from_alpha,
    frobenius_eigenvalue,
    inertia_group,
    is_abelian,
    local_conductor,
    local_data,
    tame_conductor,
    trace_sym,
    wild_conductor,
)

G = InertiaGroup


def curve(ainvs):
    return EllipticCurve.from_ainvs(ainvs, allow_cm=True)


def test_trace_sym_small():
    t = 7
    assert trace_sym(0, t, 1) == 1
    assert trace_sym(2, t, 1) == t * t - 1
    assert trace_sym(3, t, 1) == t**3 - 2 * t


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 30), st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_trace_sym_is_sum_of_eigenvalue_powers(m, a):
    # eigenvalues a, 1/a: trace of Sym^m is sum_{i} a^(m-2i)
    if abs(a) < 0.3:
        return
    direct = sum(a ** (m - 2 * i) for i in range(m + 1))
    rec = trace_sym(m, a + 1 / a, 1)
    assert abs(direct - rec) <= 1e-6 * max(1, abs(direct))


@pytest.mark.parametrize("m,phi,b", [(2, G.C2, 3), (6, G.SL2F3, 1), (1, G.C4, 0), (3, G.C3, 2), (0, G.Q8, 1)])
def test_beta_examples(m, phi, b):
    assert beta(m, phi) == b
    assert beta_oracle(m, phi) == b


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 200), st.sampled_from(list(InertiaGroup)))
def test_beta_matches_oracle_beyond_table_range(m, phi):
    assert beta(m, phi) == beta_oracle(m, phi)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100), st.sampled_from(list(InertiaGroup)))
def test_beta_bounds(m, phi):
    b = beta(m, phi)
    assert 0 <= b <= m + 1
    assert epsilon(m, phi) == m + 1 - b


def test_inertia_groups_at_5():
    assert inertia_group(curve((0, 0, 0, 0, 25)), 5) is G.C3
    assert inertia_group(curve((0, 0, 0, 5, 0)), 5) is G.C4
    assert is_abelian(curve((0, 0, 0, 5, 0)), 5, G.C4)
    assert not is_abelian(curve((0, 0, 0, 0, 25)), 5, G.C3)
    assert not is_abelian(curve((0, -1, 0, 1, 0)), 2, G.Q8)


def test_frobenius_eigenvalue_rescaled():
    alpha = frobenius_eigenvalue(curve((0, 0, 0, 5, 0)), 5)
    assert abs(alpha - mpc(1, 2)) < mpf(10) ** -40


def test_reduction_kinds():
    E = parse_curve("0,-1,1,0,0")
    assert local_data(E, 7).kind is LocalKind.GOOD
    d = local_data(E, 11)
    assert d.kind is LocalKind.SPLIT and d.a_p == 1
    assert local_data(curve((0, 0, 0, 0, 5)), 5).kind is LocalKind.POT_GOOD


@pytest.mark.parametrize(
    "ainvs,p,m,poly",
    [
        ((0, -1, 1, 0, 0), 11, 3, "1 - T"),
        ((0, 0, 0, 0, 25), 5, 2, "1 + 5T"),
        ((0, -1, 1, 0, 0), 3, 2, "1 + 2T - 6T^2 - 27T^3"),
        ((0, 0, 0, 5, 0), 5, 4, "1 - 11T + 275T^2 - 15625T^3"),
        ((0, 0, 0, 0, 25), 5, 3, "1 + 125T^2"),
    ],
)
def test_euler_factor_examples(ainvs, p, m, poly):
    assert str(euler_factor(curve(ainvs), p, m)) == poly


def test_euler_factor_good_prime_from_roots():
    # (1 - 3T)(1 + 5T + 9T^2) from alpha = (-1 + i sqrt 11)/2
    with mp.workprec(120):
        alpha = mpc(-0.5, mp.sqrt(11) / 2)
        assert euler_poly_from_alpha(alpha, 3, 2, 1, 100) == (1, 2, -6, -27)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([5, 7, 11, 13, 101]), st.integers(1, 12), st.integers(-20, 20))
def test_exact_and_numeric_abelian_polys_agree(p, m, a):
    if a * a > 4 * p:
        return
    # coefficients reach p^(m(m+1)/2), so precision must cover that many bits
    prec = 64 + 4 * m * (m + 1) * p.bit_length()
    with mp.workprec(prec + 20):
        alpha = mpc(mpf(a) / 2, mp.sqrt(4 * p - a * a) / 2)
        for d in (1, 2, 3, 4, 6):
            assert euler_poly_from_alpha(alpha, p, m, d, prec) == abelian_euler_poly(a, p, m, d)


def test_euler_polynomial_degree_matches_conductor_drop():
    # deg P = m + 1 - (tame conductor) at tamely ramified p >= 5
    E = curve((0, 0, 0, 5, 0))
    for m in range(1, 13):
        d = local_data(E, 5)
        assert euler_factor(E, 5, m).degree == beta(m, d.phi)


def test_tame_conductor_rules():
    E = parse_curve("0,-1,1,0,0")
    for m in range(1, 8):
        assert tame_conductor(m, local_data(E, 11)) == m
        assert wild_conductor(E, 11, m) == 0
    assert epsilon(3, G.C2) == 4


def test_potentially_multiplicative_rules():
    # the -11 twist of 11a3 has conductor 121 and becomes multiplicative over a ramified quadratic field
    E = parse_curve("0,-1,1,-40,-221")
    assert E.conductor == 121
    d = local_data(E, 11)
    assert d.kind is LocalKind.POT_MULT
    assert [tame_conductor(m, d) for m in range(1, 6)] == [2, 2, 4, 4, 6]
    assert str(euler_factor(E, 11, 4)) == "1 - T"
    assert str(euler_factor(E, 11, 3)) == "1"


def test_unramified_twist_stays_multiplicative():
    # the -1 twist (conductor 176) keeps multiplicative reduction at 11, now nonsplit
    d = local_data(parse_curve("0,1,0,-5,-13"), 11)
    assert d.kind is LocalKind.NONSPLIT and d.a_p == -1


def test_minimal_twist_20a2():
    F, v = minimal_twist_at(WeierstrassModel(0, 1, 0, -1, 0), 2)
    assert v == 2
    assert inertia_group(parse_curve("0,1,0,-1,0"), 2) is G.C3


def test_wild_conductor_40a1():
    E = parse_curve("0,0,0,-7,-6")
    assert [local_conductor(E, 2, m) for m in range(1, 6)] == [3, 4, 6, 6, 9]
    assert local_conductor(E, 2, 9) == 15


def test_semistable_has_no_wild_part():
    for text in ("0,-1,1,0,0", "0,0,1,-1,0", "1,0,1,4,-6"):
        E = parse_curve(text)
        for p in E.bad_primes:
            for m in range(1, 10):
                assert wild_conductor(E, p, m) == 0
