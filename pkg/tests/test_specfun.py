import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from susy_forge.core import ConfigError, make_grid, truncated_infinite, truncated_singular
from susy_forge.models import coulomb_pack
from susy_forge.numerics import anchored_integral
from susy_forge.specfun import (
    coulomb_f, hyp2f2, log_lower_incomplete_gamma_int, lower_incomplete_gamma_int,
)

from conftest import tab

# int_0^r (w/u1)^2 for l = 0, 40-digit mpmath quadrature of the closed forms
COULOMB_L0_INTEGRAL = {
    0.5: 0.001887108188395507622010971922457419304064,
    1.0: 0.04369891950632302749878359092522431055852,
    2.0: 0.8993487612986847043593523301857873113913,
    5.0: 138.7604058257541881642749215938143143961,
    30.0: 16418282118234699691199.09259008684146688,
}


def test_gamma_order_one():
    assert abs(lower_incomplete_gamma_int(1, math.log(2)) - 0.5) < 1e-15


def test_gamma_three_two():
    # 2 - 10 e^-2
    assert abs(lower_incomplete_gamma_int(3, 2.0) - 0.6466471676338730810600050502751559659237) < 1e-12


@pytest.mark.parametrize("a", [1, 2, 5, 17])
def test_gamma_at_zero(a):
    assert lower_incomplete_gamma_int(a, 0.0) == 0.0


@pytest.mark.parametrize("a", [0, -1, 2.5])
def test_gamma_order_rejected(a):
    with pytest.raises(ConfigError):
        lower_incomplete_gamma_int(a, 1.0)


def test_gamma_negative_argument_rejected():
    with pytest.raises(ConfigError):
        lower_incomplete_gamma_int(2, -1.0)


def test_gamma_clamped_far_out():
    assert lower_incomplete_gamma_int(5, 1e4) == 24.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 21), st.floats(1e-3, 80))
def test_gamma_against_mpmath(a, x):
    ref = float(mp.gammainc(a, 0, x))
    assert lower_incomplete_gamma_int(a, x) == pytest.approx(ref, rel=1e-13)
    assert float(np.exp(log_lower_incomplete_gamma_int(a, np.array([x]))[0])) == pytest.approx(ref, rel=1e-13)


def test_gamma_vectorized_matches_scalar():
    x = np.array([0.0, 0.3, 3.0, 30.0])
    v = lower_incomplete_gamma_int(4, x)
    assert np.allclose(v, [lower_incomplete_gamma_int(4, float(t)) for t in x], rtol=1e-14)


def test_hyp2f2_at_zero():
    assert hyp2f2(0.3, 1.7, 2.2, 4.1, 0.0) == 1.0


def test_hyp2f2_against_brute_force_series():
    # term_n = 12 z^n / ((n+2) (n+3)!); 40-digit reference at z = 2
    assert abs(hyp2f2(1, 2, 3, 4, 2.0) - 1.468030383225260639221641565196857109431) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3), st.floats(0.1, 3), st.floats(0.5, 5), st.floats(0.5, 5), st.floats(0, 20))
def test_hyp2f2_against_mpmath(a1, a2, b1, b2, z):
    ref = float(mp.hyp2f2(a1, a2, b1, b2, z))
    assert hyp2f2(a1, a2, b1, b2, z) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("b", [(-1, 3), (3, 0), (3, -4)])
def test_hyp2f2_pole(b):
    with pytest.raises(ConfigError):
        hyp2f2(1, 2, b[0], b[1], 1.0)


@pytest.mark.parametrize("rep", ["double-sum", "hyp-plus-tail"])
def test_coulomb_f_at_origin(rep):
    assert coulomb_f(0, -0.1, 0.0, rep) == -0.1


def test_coulomb_f_representations_agree_at_one():
    a = coulomb_f(0, 0.0, 1.0, "double-sum")
    b = coulomb_f(0, 0.0, 1.0, "hyp-plus-tail")
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("r", sorted(COULOMB_L0_INTEGRAL))
def test_coulomb_f_against_high_precision_quadrature(r):
    ref = -0.1 - COULOMB_L0_INTEGRAL[r]
    assert coulomb_f(0, -0.1, r) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_coulomb_f_large_r_against_grid_quadrature():
    # f(30) = f0 - int_0^30 (w/u1)^2 with the package quadrature on the closed-form w/u1
    p = coulomb_pack(0)
    g = make_grid(0.0, 30.0, 30000, truncated_singular(0.0, 1e-3), truncated_infinite(1))
    q = p.w_over_u1(g.x)
    I = anchored_integral(tab(g, q * q), 0.0).values[-1]
    assert coulomb_f(0, -0.1, 30.0) == pytest.approx(-0.1 - I, rel=1e-6)


@pytest.mark.parametrize("l", [0, 1, 2])
@pytest.mark.parametrize("f0", [0.0, -0.1])
def test_coulomb_f_representation_equality(l, f0):
    r = np.array([0.1, 0.5, 1, 2, 5, 10])
    a = coulomb_f(l, f0, r, "double-sum")
    b = coulomb_f(l, f0, r, "hyp-plus-tail")
    assert np.all(np.abs(a - b) <= 1e-9 * (1 + np.abs(a)))


@pytest.mark.parametrize("l", [0, 1, 2])
def test_coulomb_f_quadrature_consistency(l):
    p = coulomb_pack(l)
    g = make_grid(0.0, 10.0, 10000, truncated_singular(0.0, 1e-3), truncated_infinite(1))
    q = p.w_over_u1(g.x)
    F = anchored_integral(tab(g, q * q), 0.0)
    for r in (0.1, 0.5, 1, 2, 5, 10):
        i = g.index_of(r)
        ref = -0.1 - F.values[i]
        assert coulomb_f(l, -0.1, g.x[i]) == pytest.approx(ref, rel=1e-7, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.lists(st.floats(0.01, 20), min_size=2, max_size=8, unique=True))
def test_coulomb_f_strictly_decreasing(l, rs):
    r = np.sort(np.array(rs))
    r = r[np.concatenate([[True], np.diff(r) > 1e-6])]
    # f - f0 carries full relative accuracy; with f0 = -0.1 increments below its ulp round away
    assert np.all(np.diff(coulomb_f(l, 0.0, r)) < 0)
    assert np.all(np.diff(coulomb_f(l, -0.1, r)) <= 0)


def test_coulomb_f_rejects_bad_input():
    with pytest.raises(ConfigError):
        coulomb_f(0, -0.1, -1.0)
    with pytest.raises(ConfigError):
        coulomb_f(0.5, -0.1, 1.0)
    with pytest.raises(ConfigError):
        coulomb_f(0, -0.1, 1.0, "contour")


def test_tail_prefactor_confirmed_by_quadrature():
    # the (l+1)^2/4 prefactor of the incomplete-gamma tail is needed as printed
    for l in (1, 2):
        s = lambda y: 2 * y / (l + 1)
        norm = 1 / ((l + 1) * mp.sqrt(mp.factorial(2 * l + 1)))
        ratio = lambda y: (-mp.gammainc(2 * l + 3, 0, s(y)) / mp.factorial(2 * l + 2)) / (
            norm * s(y) ** (l + 1) * mp.exp(-y / (l + 1)))
        ref = -float(mp.quad(lambda y: ratio(y) ** 2, [0, 2]))
        assert coulomb_f(l, 0.0, 2.0) == pytest.approx(ref, rel=1e-11)
