import math

import numpy as np
import pytest

from susy_forge.confluent2 import (
    apply_b2, b2_coefficients, compute_u2, compute_v2, compute_w, grid_norm, map_eigenstate_2,
    missing_state_2, normalizability, prepare_seed, w_windows,
)
from susy_forge.core import (
    Anchoring, ConfigError, DivergentIntegralError, SingularTransformError, tabulate,
)
from susy_forge.numerics import interior, schrodinger_residual, wronskian
from susy_forge.verify import intertwining_residual, kernel_ratio

from conftest import tab

GAMMA_3_2 = 0.6466471676338730810600050502751559659237


@pytest.fixture(scope="module")
def free_chain(free):
    g = free.default_grid()
    V0 = tabulate(free.model(), g)
    u1 = prepare_seed(tab(g, free.u1(g.x), "u1"), V0, free.epsilon, free.u1(g.x))
    return V0, u1, compute_w(u1)


@pytest.fixture(scope="module")
def coulomb_chain(coulomb):
    g = coulomb.default_grid()
    V0 = tabulate(coulomb.model(), g)
    u1 = prepare_seed(tab(g, coulomb.u1(g.x), "u1"), V0, coulomb.epsilon, coulomb.u1_derivative(g.x))
    return V0, u1, compute_w(u1)


def test_free_w_closed_form(free, free_chain):
    _, u1, w = free_chain
    assert np.max(np.abs(w.values / free.w(w.x) - 1)) < 1e-10
    assert np.all(w.values < 0)


def test_coulomb_w_closed_form(coulomb, coulomb_chain):
    _, u1, w = coulomb_chain
    r = w.x
    ref = (2 * r * r + 2 * r + 1) * np.exp(-2 * r) - 1
    assert np.max(np.abs(w.values - ref)[r <= 30]) < 1e-7
    assert w(1.0) == pytest.approx(-0.3233235838169365405300025251375779829618, abs=1e-7)


def test_w_matches_package_closed_form(coulomb, coulomb_chain):
    _, _, w = coulomb_chain
    assert np.max(np.abs(w.values - coulomb.w(w.x))) < 1e-7


def test_w_right_anchoring_positive(free_chain):
    _, u1, _ = free_chain
    w = compute_w(u1.reflected(), Anchoring.RIGHT)
    # w at the last sample is the extrapolated tail beyond it
    assert np.all(w.values > 0) and w.values[-1] < 1e-15 * w.values[0]


def test_w_explicit_anchoring(free_chain):
    _, u1, wl = free_chain
    w = compute_w(u1, Anchoring.EXPLICIT, w0=-3.0, x0=0.0)
    assert w(0.0) == -3.0
    assert np.max(np.abs(w.values - wl.values - (w(0.0) - wl(0.0)))) <= 1e-12 * np.max(np.abs(wl.values))
    with pytest.raises(ConfigError):
        compute_w(u1, Anchoring.EXPLICIT, w0=-3.0)


def test_w_rejects_zero_seed(free_chain):
    _, u1, _ = free_chain
    with pytest.raises(ConfigError):
        compute_w(u1.with_values(np.zeros(len(u1))))


def test_w_windows_free(free_chain):
    _, u1, _ = free_chain
    lo, hi = w_windows(u1, 0.0)
    assert lo == pytest.approx(0.5, abs=1e-9)
    assert hi == math.inf


def test_w_windows_coulomb(coulomb_chain):
    _, u1, _ = coulomb_chain
    lo, hi = w_windows(u1, 1.0)
    assert lo == pytest.approx(GAMMA_3_2 / 2, abs=1e-8)
    assert lo + hi == pytest.approx(1.0, abs=1e-8)


def test_v2_free_is_zero(free_chain):
    V0, _, w = free_chain
    # w ∝ e^{2x} so (ln w)'' = 0
    assert np.max(np.abs(interior(compute_v2(V0, w).values))) < 1e-6


def test_v2_singular_when_w_has_node(free_chain):
    V0, u1, _ = free_chain
    w = compute_w(u1, Anchoring.EXPLICIT, w0=-0.1, x0=0.0)
    with pytest.raises(SingularTransformError):
        compute_v2(V0, w)


def test_eta_is_minus_u1_squared_over_w(free_chain):
    V0, u1, w = free_chain
    b = b2_coefficients(V0, w, -1.0)
    assert np.allclose(b.eta.values, -u1.values ** 2 / w.values, rtol=1e-12)


def test_gamma_free_is_one(free_chain):
    V0, _, w = free_chain
    # eta = 2, gamma = 0 + 2 - 0 - 1
    b = b2_coefficients(V0, w, -1.0)
    assert np.max(np.abs(interior(b.gamma.values) - 1)) < 1e-6


def test_b2_rejects_epsilon_mismatch(free_chain):
    V0, _, w = free_chain
    with pytest.raises(ConfigError):
        b2_coefficients(V0, w, -0.5)


@pytest.mark.parametrize("chain", ["free_chain", "coulomb_chain"])
def test_b2_kernel(request, chain):
    V0, u1, w = request.getfixturevalue(chain)
    b = b2_coefficients(V0, w, u1.meta["epsilon"])
    assert kernel_ratio(apply_b2(b, u1, energy=u1.meta["epsilon"]), u1) < 1e-5
    u2 = compute_u2(u1, w, x0=float(np.median(u1.x)))
    assert kernel_ratio(apply_b2(b, u2), u2) < 1e-5


@pytest.mark.parametrize("n", [1, 2])
def test_b2_intertwining_coulomb(coulomb, coulomb_chain, n):
    V0, u1, w = coulomb_chain
    b = b2_coefficients(V0, w, coulomb.epsilon)
    V2 = compute_v2(V0, w)
    psi = tab(V0.grid, coulomb.eigenstate(n, V0.x), deriv=None)
    E = coulomb.E(n)
    res = intertwining_residual(V2, lambda p: apply_b2(b, p, energy=E), psi, E)
    assert not res.kernel_member and res.residual < 1e-4


@pytest.mark.parametrize("n", [1, 2])
def test_map_eigenstate_2(coulomb, coulomb_chain, n):
    V0, _, w = coulomb_chain
    b = b2_coefficients(V0, w, coulomb.epsilon)
    psi = tab(V0.grid, coulomb.eigenstate(n, V0.x))
    img = map_eigenstate_2(b, psi, coulomb.E(n))
    assert abs(img.meta["raw_norm"] - 1) < 2e-2
    assert grid_norm(img) == pytest.approx(1.0, abs=1e-12)
    # the image inherits the (truncation-limited) decay of psi_n at the far end
    decay = abs(psi.values[-1]) / np.max(np.abs(psi.values))
    assert abs(img.values[-1]) / np.max(np.abs(img.values)) < 10 * decay
    assert abs(img.values[0]) < 1e-2 * np.max(np.abs(img.values))


def test_map_eigenstate_2_rejects_epsilon(coulomb, coulomb_chain):
    V0, u1, w = coulomb_chain
    b = b2_coefficients(V0, w, coulomb.epsilon)
    with pytest.raises(ConfigError):
        map_eigenstate_2(b, u1, coulomb.epsilon)


def test_missing_state_2_free_non_normalizable(free_chain):
    _, u1, w = free_chain
    psi = missing_state_2(u1, w)
    # u1/w = -2 e^{-x} blows up on the left
    assert psi.meta["status"] == "non-normalizable"


def test_missing_state_2_coulomb_left_anchored_diverges_at_origin(coulomb_chain):
    # w(0) = 0 gives u1/w ~ -3/(2 r^2) at the origin
    _, u1, w = coulomb_chain
    assert missing_state_2(u1, w).meta["status"] == "non-normalizable"


def test_missing_state_2_coulomb_normalizable(coulomb_chain):
    V0, u1, _ = coulomb_chain
    w = compute_w(u1, Anchoring.EXPLICIT, w0=-0.5, x0=0.0)
    psi = missing_state_2(u1, w)
    assert psi.meta["status"] == "normalizable"
    assert abs(psi.meta["tail_right"]) < 1e-8 * psi.meta["norm2_grid"]
    assert grid_norm(psi) == pytest.approx(1.0, abs=1e-12)
    V2 = compute_v2(V0, w)
    assert schrodinger_residual(psi, V2, -1.0) < 1e-4


def test_normalizability_report(line_grid):
    g = line_grid
    rep = normalizability(tab(g, np.exp(-g.x ** 2)))
    assert rep["normalizable"] and rep["norm2_grid"] == pytest.approx(math.sqrt(math.pi / 2), rel=1e-10)
    assert not normalizability(tab(g, np.exp(g.x / 4)))["normalizable"]


@pytest.mark.parametrize("chain", ["free_chain", "coulomb_chain"])
def test_u2_chain_equation_and_wronskian(request, chain):
    V0, u1, w = request.getfixturevalue(chain)
    u2 = compute_u2(u1, w, x0=float(np.median(u1.x)))
    eps = u1.meta["epsilon"]
    assert schrodinger_residual(u2, V0, eps, source=u1, scale="terms") < 1e-6
    W = u1.values * u2.deriv - u1.deriv * u2.values
    # the two products cancel; rounding is relative to their size
    size = np.abs(u1.values * u2.deriv) + np.abs(w.values)
    assert np.max(np.abs(W - w.values) / size) < 1e-12
    Wfd = wronskian(u1, u2)
    assert np.max(interior(np.abs(Wfd - w.values) / size)) < 1e-6


def test_u2_beta1_shift(free_chain):
    _, u1, w = free_chain
    a, b = compute_u2(u1, w, x0=0.0), compute_u2(u1, w, beta1=0.7, x0=0.0)
    scale = np.maximum(np.abs(a.values), u1.values)
    assert np.max(np.abs(b.values - a.values - 0.7 * u1.values) / scale) < 1e-12
    assert b(0.0) == pytest.approx(0.7)


def test_u2_free_from_minus_infinity_diverges(free_chain):
    # w/u1^2 = -1/(2k) is not integrable from -inf
    _, u1, w = free_chain
    with pytest.raises(DivergentIntegralError):
        compute_u2(u1, w)


def test_prepare_seed_rejects_zero(free_chain):
    V0, u1, _ = free_chain
    with pytest.raises(ConfigError):
        prepare_seed(u1.with_values(np.zeros(len(u1))), V0, -1.0)


def test_prepare_seed_fd_derivative(free, free_chain):
    V0, u1, _ = free_chain
    s = prepare_seed(u1.with_values(u1.values), V0, -1.0)
    assert np.max(np.abs(interior(s.deriv / u1.values - 1))) < 1e-9
