import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from susy_forge.core import (
    BoundaryKind, ConfigError, Grid, GridFn, Regime, SpectrumReport, Level, make_grid, tabulate,
    truncated_infinite, truncated_singular, FINITE,
)
from susy_forge.models import coulomb_pack, free_particle_pack


def test_grid_spacing_full_line():
    g = make_grid(-20, 20, 40001)
    assert g.h == pytest.approx(1e-3, abs=1e-15)
    assert g.x[0] == -20 and g.x[-1] == 20


def test_singular_end_is_offset():
    g = make_grid(0, 60, 60001, truncated_singular(0.0, 1e-3), truncated_infinite(1))
    assert g.x[0] == pytest.approx(1e-3, abs=1e-15)
    assert g.left.kind is BoundaryKind.TRUNCATED_SINGULAR and g.left.nominal == 0.0
    assert g.right.nominal == math.inf


@pytest.mark.parametrize("args", [(5, 5, 100), (5, 4, 100), (0, 1, 2), (0, math.inf, 10),
                                  (math.nan, 1, 10)])
def test_bad_grids_rejected(args):
    with pytest.raises(ConfigError):
        make_grid(*args)


def test_singular_offset_must_be_positive():
    with pytest.raises(ConfigError):
        truncated_singular(0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-100, 100), st.floats(1e-3, 200), st.integers(3, 5000))
def test_grid_uniformity(x_min, width, n):
    g = make_grid(x_min, x_min + width, n)
    d = np.diff(g.x)
    assert np.all(d > 0)
    scale = max(abs(g.x_min), abs(g.x_max))
    assert np.max(np.abs(d - g.h)) <= 4 * np.finfo(float).eps * scale + 1e-300


def test_reflected_grid_swaps_ends():
    g = make_grid(0, 60, 101, truncated_singular(0.0, 1e-3), truncated_infinite(1))
    r = g.reflected()
    assert r.x_min == -g.x_max and r.x_max == -g.x_min
    assert r.left.nominal == -math.inf and r.right.kind is BoundaryKind.TRUNCATED_SINGULAR


def test_gridfn_shape_checked():
    g = make_grid(0, 1, 11)
    with pytest.raises(ConfigError):
        GridFn(g, np.zeros(10))


def test_gridfn_nonfinite_rejected_unless_flagged_at_truncated_ends():
    g = make_grid(0, 1, 11, truncated_singular(0.0, 0.1), FINITE)
    v = np.ones(11)
    v[0] = np.inf
    with pytest.raises(ConfigError):
        GridFn(g, v)
    GridFn(g, v, allows_endpoint_blowup=True)
    v[5] = np.nan
    with pytest.raises(ConfigError):
        GridFn(g, v, allows_endpoint_blowup=True)


def test_gridfn_values_are_read_only():
    g = make_grid(0, 1, 11)
    fn = GridFn(g, np.zeros(11))
    with pytest.raises(ValueError):
        fn.values[0] = 1.0


def test_tabulate_free_is_zero():
    p = free_particle_pack(1.0)
    V = tabulate(p.model(), p.default_grid(401))
    assert np.all(V.values == 0.0)


@pytest.mark.parametrize("l, r, expected", [(0, 1.0, -2.0), (1, 2.0, -0.5)])
def test_tabulate_coulomb(l, r, expected):
    p = coulomb_pack(l)
    g = make_grid(0.0, 4.0, 4001, truncated_singular(0.0, 1e-3), truncated_infinite(1))
    V = tabulate(p.model(), g)
    assert V(r) == pytest.approx(expected, abs=1e-2)
    i = g.index_of(r)
    assert V.values[i] == pytest.approx(-2 / g.x[i] + l * (l + 1) / g.x[i] ** 2, rel=1e-15)


def test_tabulate_coulomb_exact_samples():
    # grid spacing 1e-3 from r = 1e-3 puts samples on r = 1 and r = 2
    p = coulomb_pack(1)
    g = p.default_grid()
    V = tabulate(p.model(), g)
    assert V(2.0) == pytest.approx(-0.5, abs=1e-12)
    assert coulomb_pack(0).V0(1.0) == -2.0


def test_tabulate_rejects_singular_point():
    p = coulomb_pack(0)
    g = Grid(0.0, 1.0, 11, truncated_singular(0.0), FINITE)
    with pytest.raises(ConfigError):
        tabulate(p.model(), g)


def test_tabulate_is_deterministic():
    p = coulomb_pack(2)
    g = p.default_grid(5001)
    a = tabulate(p.model(), g).values
    b = tabulate(p.model(), g).values
    assert a.tobytes() == b.tobytes()


def test_spectrum_report_invariants():
    SpectrumReport((Level(0, -1.0, 0.0), Level(1, -0.25, 1e-6)))
    with pytest.raises(ConfigError):
        SpectrumReport((Level(0, -0.25, 0.0), Level(1, -1.0, 0.0)))
    with pytest.raises(ConfigError):
        SpectrumReport((Level(0, -1.0, -1.0),))


def test_spectrum_report_dict_round_trip():
    rep = SpectrumReport((Level(0, -1.0, 1e-7),), classification=Regime.AUGMENTED)
    d = rep.to_dict()
    assert d["eigenvalues"] == [{"index": 0, "E": -1.0, "residual": 1e-7}]
    assert d["classification"] == "augmented"
