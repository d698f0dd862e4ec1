import math

import mpmath as mp
import numpy as np
import pytest

from susy_forge.core import ConfigError, Regime, SeedKind, tabulate
from susy_forge.models import (
    MAX_L, coulomb_well_profile, coulomb_pack, free_particle_pack, local_minimum,
)
from susy_forge.numerics import integral_from_endpoint, interior, schrodinger_residual

from conftest import tab


def test_x1_of_quarter():
    assert free_particle_pack(1).x1_of_f0(-0.25) == 0.0


def test_free_sigma_minus():
    assert free_particle_pack(1).sigma_minus == 0.125
    assert free_particle_pack(2).sigma_minus == pytest.approx(1 / 64)


def test_poschl_teller_value():
    ref = float(-2 * mp.sech(1) ** 2)  # -0.83994868322805...
    assert free_particle_pack(1).v3_closed(1.0, 0.0) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("f0", [-0.12, 0.0, 0.3])
def test_x1_outside_window(f0):
    with pytest.raises(ConfigError):
        free_particle_pack(1).x1_of_f0(f0)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x1", [-1.0, 0.0, 0.7])
def test_x1_round_trip(k, x1):
    p = free_particle_pack(k)
    assert p.x1_of_f0(p.f0_of_x1(x1)) == pytest.approx(x1, abs=1e-12)


def test_free_closed_forms_consistent():
    p = free_particle_pack(1.3)
    x = np.linspace(-2, 2, 9)
    # w' = -u1^2 and f' = -(w/u1)^2
    h = 1e-5
    dw = (p.w(x + h) - p.w(x - h)) / (2 * h)
    df = (p.f(x + h, -1) - p.f(x - h, -1)) / (2 * h)
    assert np.allclose(dw, -p.u1(x) ** 2, rtol=1e-8)
    assert np.allclose(df, -(p.w(x) / p.u1(x)) ** 2, rtol=1e-8)


def test_free_particle_needs_positive_k():
    with pytest.raises(ConfigError):
        free_particle_pack(0.0)


def test_free_model_fields():
    m = free_particle_pack(1).model()
    assert m.epsilon == -1 and m.E0 == math.inf and m.seed_kind is SeedKind.NONPHYSICAL


def test_coulomb_l0_seed():
    p = coulomb_pack(0)
    r = np.linspace(0.01, 10, 50)
    assert np.allclose(p.u1(r), 2 * r * np.exp(-r), rtol=1e-14)


@pytest.mark.parametrize("l", [0, 1, 3])
def test_coulomb_seed_normalized(l):
    p = coulomb_pack(l)
    g = p.default_grid()
    F = integral_from_endpoint(tab(g, p.u1(g.x) ** 2), "left")
    assert abs(F.values[-1] - 1) < 1e-8


def test_coulomb_w_at_one():
    assert coulomb_pack(0).w(1.0) == pytest.approx(-0.3233235838169365405300025251375779829618, abs=1e-14)


def test_coulomb_energies():
    p = coulomb_pack(0)
    assert [p.E(n) for n in range(3)] == [-1.0, -0.25, pytest.approx(-1 / 9)]
    with pytest.raises(ConfigError):
        p.E(-1)


def test_coulomb_l1_seed_and_w_limit():
    p = coulomb_pack(1)
    r = np.linspace(0.1, 5, 20)
    ratio = p.u1(r) / (r ** 2 * np.exp(-r / 2))
    assert np.allclose(ratio, ratio[0], rtol=1e-13)
    assert abs(p.w(120.0) + 1) < 1e-8
    # w uses gamma(5, r) for l = 1
    assert p.w(2.0) == pytest.approx(-float(mp.gammainc(5, 0, 2)) / 24, rel=1e-13)


@pytest.mark.parametrize("l", [0, 1, 2])
def test_coulomb_eigenstates_orthonormal(l):
    p = coulomb_pack(l)
    g = p.default_grid()
    psi = [p.eigenstate(n, g.x) for n in range(3)]
    for i in range(3):
        for j in range(3):
            ov = integral_from_endpoint(tab(g, psi[i] * psi[j]), "left").values[-1]
            assert abs(ov - (i == j)) < 1e-7
    assert np.allclose(psi[0], p.u1(g.x), rtol=1e-10, atol=1e-300)


@pytest.mark.parametrize("l", [0, 2])
def test_seed_exactness(l):
    p = coulomb_pack(l)
    g = p.default_grid()
    V = tabulate(p.model(), g)
    assert schrodinger_residual(tab(g, p.u1(g.x)), V, p.epsilon) < 1e-6


def test_free_seed_exactness():
    p = free_particle_pack(1)
    g = p.default_grid()
    V = tabulate(p.model(), g)
    assert schrodinger_residual(tab(g, p.u1(g.x)), V, p.epsilon) < 1e-6


@pytest.mark.parametrize("l", [0, 1, 2])
def test_w_over_u1_series_matches_closed_form(l):
    p = coulomb_pack(l)
    r = np.array([0.05, 0.5, 1.0, 3.0])
    assert np.allclose(p.w_over_u1_series(r), p.w_over_u1(r), rtol=1e-12)
    assert p.w_over_u1(np.array([0.0]))[0] == 0.0


def test_coulomb_bad_l():
    with pytest.raises(ConfigError):
        coulomb_pack(MAX_L + 1)
    with pytest.raises(ConfigError):
        coulomb_pack(-1)


def test_coulomb_f_forbidden():
    with pytest.raises(ConfigError):
        coulomb_pack(0).f(1.0, 0.1)


def test_coulomb_v3_closed_form_matches_pipeline(coulomb, coulomb_result):
    v3 = coulomb.v3(coulomb.default_grid(), -0.1)
    assert np.max(np.abs(interior(v3 - coulomb_result.v3.values))) < 1e-5


def test_well_profile_well_and_tail():
    t = coulomb_well_profile(-0.1)
    assert 0.3 < t.well_r < 2.5
    tail = np.abs(t.v3 - t.v0)[t.r > 50]
    assert np.max(tail[:-5]) < 1e-3


def test_well_profile_forbidden():
    with pytest.raises(ConfigError):
        coulomb_well_profile(0.1)


def test_local_minimum():
    x = np.linspace(-2, 2, 401)
    assert local_minimum(x, (x - 0.5) ** 2) == pytest.approx((0.5, 0.0), abs=1e-12)
    assert local_minimum(x, x) is None
