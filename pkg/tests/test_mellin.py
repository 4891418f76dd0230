import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from sympow.mellin import (
    MeshFormatError,
    MeshRangeError,
    MeshStore,
    F_value,
    gamma_factor,
    gamma_half_laurent,
    gamma_laurent,
    mesh_build,
    mesh_eval,
    mesh_eval_flagged,
    mesh_verify,
    node_x,
    read_mesh,
    write_mesh,
)
from sympow.numerics import gamma_eval, harmonic_H


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.mark.parametrize("m,text", [(1, "Gamma(s)"), (3, "Gamma(s)Gamma(s-1)"), (2, "Gamma(s/2)Gamma(s)"), (4, "Gamma(s/2-1)Gamma(s)Gamma(s-1)")])
def test_gamma_factor_shapes(m, text):
    assert str(gamma_factor(m)) == text


def test_gamma_factor_value():
    with mp.workprec(120):
        assert abs(gamma_factor(3)(mpf(5) / 2, 100) - mp.gamma(2.5) * mp.gamma(1.5)) < mpf(2) ** -95


@pytest.mark.parametrize("x", ["0.125", "1", "2.5", "7", "30"])
def test_residue_series_exp(x):
    P = 160
    with mp.workprec(P + 20):
        val = F_value(1, 0, 1, mpf(x), P)
        assert rel(val, mp.exp(-mpf(x))) < mpf(2) ** -(P - 12)


def test_F_value_small_x_limit():
    # only the z = 0 residue survives as x -> 0
    with mp.workprec(120):
        for m, mu in ((2, 2), (3, 2), (5, 3)):
            assert rel(F_value(m, 0, mu, mpf(10) ** -12, 100), gamma_factor(m)(mu, 100)) < 1e-9


def test_F_value_decay_scaling():
    # log|F| at x and 2^(m+1) x follows exp(-x^(2/(m+1))) within a factor 4
    m = 3
    with mp.workprec(200):
        x = mpf(4)
        a = mp.log(F_value(m, 0, 2, x, 120))
        b = mp.log(F_value(m, 0, 2, x * 2 ** (m + 1), 120))
        ratio = (b - a) / -(mpf(x * 2 ** (m + 1)) ** (mpf(2) / (m + 1)) - x ** (mpf(2) / (m + 1)))
        assert 0.25 < ratio < 4


def test_gamma_laurent_residues():
    with mp.workprec(150):
        s0 = gamma_laurent(0, 4, 128)
        assert s0.valuation == -1
        assert abs(s0.coeffs[0] - 1) < mpf(2) ** -120
        assert abs(s0.coeffs[1] + mp.euler) < mpf(2) ** -120
        assert abs(gamma_laurent(1, 2, 128).coeffs[0] + 1) < mpf(2) ** -120
        assert abs(gamma_laurent(2, 2, 128).coeffs[0] - mpf(1) / 2) < mpf(2) ** -120


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_gamma_laurent_vs_finite_differences(k):
    P = 128
    with mp.workprec(2 * P):
        s = gamma_laurent(k, 5, P)
        # evaluate at the differentiator's own (raised) precision so the step survives
        f = lambda w: w * gamma_eval(-k + w, mp.prec)
        for n in range(4):
            fd = mp.diff(f, 0, n, singular=True) / mp.factorial(n)
            assert abs(s.coeffs[n] - fd) < mpf(2) ** (40 - P) * max(1, abs(fd))


def test_gamma_half_laurent():
    with mp.workprec(150):
        assert abs(gamma_half_laurent(-1, 3, 128).coeffs[0] - mp.sqrt(mp.pi)) < mpf(2) ** -120
        s = gamma_half_laurent(0, 3, 128)
        assert s.valuation == -1 and abs(s.coeffs[0] - 2) < mpf(2) ** -120
        # about z = -1 the half factor is regular: Gamma(-1/2 + w/2)
        s = gamma_half_laurent(1, 4, 128)
        f = lambda w: gamma_eval((-1 + w) / 2, mp.prec)
        with mp.workprec(256):
            for n in range(3):
                fd = mp.diff(f, 0, n) / mp.factorial(n)
                assert abs(s.coeffs[n] - fd) < mpf(2) ** -80 * max(1, abs(fd))


def test_harmonic_H_examples():
    assert harmonic_H(1, 7) == 1
    assert harmonic_H(2, 1) == Fraction(3, 2)
    assert harmonic_H(2, 2) == Fraction(7, 4)


@pytest.fixture(scope="module")
def exp_mesh():
    return mesh_build(1, 0, 1, (-3, 4), 128)


def test_mesh_node_derivatives_closed_form(exp_mesh):
    with mp.workprec(160):
        for k, i in ((-3, 32), (0, 45), (4, 63)):
            q = node_x(k, i)
            x = mpf(q.numerator) / q.denominator
            h = mpf(2) ** k / 64
            for r in (0, 1, 5, 20):
                want = (-h) ** r * mp.exp(-x) / mp.factorial(r)
                # stored coefficients are accurate relative to the node's value
                assert abs(exp_mesh.coefficient(k, i, r) - want) < mpf(2) ** -120 * mp.exp(-x)


def test_mesh_eval_random_points(exp_mesh):
    rng = random.Random(7)
    with mp.workprec(160):
        for _ in range(200):
            x = mpf(rng.uniform(0.125, 30))
            assert rel(mesh_eval(exp_mesh, x, 128), mp.exp(-x)) < mpf(2) ** -116


def test_mesh_left_right_agreement(exp_mesh):
    assert mesh_verify(exp_mesh, samples=40, prec=128) < -(128 - 8)


def test_mesh_range(exp_mesh):
    with pytest.raises(MeshRangeError):
        mesh_eval(exp_mesh, mpf("0.01"))
    val, negligible = mesh_eval_flagged(exp_mesh, mpf(10) ** 6)
    assert val == 0 and negligible


def test_mesh_roundtrip(tmp_path, exp_mesh):
    path = tmp_path / "exp.mesh"
    write_mesh(exp_mesh, path)
    back = read_mesh(path)
    assert back.key() == exp_mesh.key()
    assert back.nodes == exp_mesh.nodes
    write_mesh(back, tmp_path / "again.mesh")
    assert (tmp_path / "again.mesh").read_bytes() == path.read_bytes()


def test_mesh_corruption_detected(tmp_path, exp_mesh):
    path = tmp_path / "exp.mesh"
    write_mesh(exp_mesh, path)
    data = bytearray(path.read_bytes())
    data[len(data) // 2] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(MeshFormatError):
        read_mesh(path)


def test_mesh_store_reuses_disk(tmp_path):
    store = MeshStore(tmp_path)
    a = store.get(3, 0, 2, mpf(1), mpf(4), 96)
    assert store.builds == 1
    fresh = MeshStore(tmp_path)
    b = fresh.get(3, 0, 2, mpf(1), mpf(3), 96)
    assert fresh.builds == 0 and b.nodes == a.nodes


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2), st.floats(0.2, 6))
def test_mesh_matches_residue_series(m, d, x):
    mu = (m + 1) // 2 if m % 2 else m // 2 + 1
    mesh = _small_mesh(m, d, mu)
    with mp.workprec(140):
        got = mesh_eval(mesh, mpf(x), 96)
        want = F_value(m, d, mu, mpf(x), 110)
        assert abs(got - want) <= mpf(2) ** -88 * max(abs(want), mpf(2) ** -40)


_MESHES = {}


def _small_mesh(m, d, mu):
    if (m, d, mu) not in _MESHES:
        _MESHES[(m, d, mu)] = mesh_build(m, d, mu, (-3, 3), 96)
    return _MESHES[(m, d, mu)]
