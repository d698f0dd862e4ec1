"""
Hyperconfluent third-order transformation.

A Jordan chain ``u1, u2, u3`` at one factorization energy gives the
Wronskian ``W(u1, u2, u3) = u1 f`` with ``f = f0 - int_{x0}^x (w/u1)**2``, and
the partner potential ``V3 = V0 - 2 (ln u1)'' - 2 (ln f)''``. The same
potential follows by a first-order step on top of the confluent
second-order one, using ``u^(2) ∝ (u1/w) f``. Both routes are implemented,
as are the operators ``A3+`` and ``B3+ = A3+ B2+`` and the regime
classification of the resulting spectrum.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .confluent2 import (
    B2Coefficients, apply_b2, b2_coefficients, compute_u2, compute_v2, compute_w, grid_norm,
    normalizability, prepare_seed,
)
from .core import (
    Anchoring, ConfigError, DivergentIntegralError, GridFn, JordanChain, Model, NodeError, Regime,
    SeedKind, SingularTransformError, TransformResult, same_grid, tabulate,
)
from .numerics import (
    TRIM, _derivative_array, anchored_integral, at_endpoint, check_nodeless, find_node,
    first_derivative_values, integral_from_endpoint, interior, log_second_derivative,
    second_solution, second_solution_base, solve_inhomogeneous,
)

APPROACH_RATIO = 1e-2


def _ratio(u1: GridFn, w: GridFn) -> tuple[np.ndarray, np.ndarray]:
    """``q = w/u1`` and its exact derivative ``(w' u1 - w u1')/u1**2``."""
    same_grid(u1, w)
    check_nodeless(u1, "u1")
    q = w.values / u1.values
    if not np.all(np.isfinite(interior(q, 1))):
        raise DivergentIntegralError("w/u1 is not finite in the interior")
    dq = (first_derivative_values(w) * u1.values - w.values * first_derivative_values(u1)) / u1.values ** 2
    return q, dq


def compute_f(u1: GridFn, w: GridFn, f0: float, x0: float) -> GridFn:
    """``f = f0 - int_{x0}^x (w/u1)**2``, with exact ``f'`` and ``f''`` attached.

    A base point on the first sample of a truncated end means the nominal
    endpoint: the integral then includes the extrapolated tail, so the
    Coulomb choice ``x0 = r = 0`` is honoured on a grid starting at ``delta``.
    """
    q, dq = _ratio(u1, w)
    I = anchored_integral(u1.with_values(q * q, "(w/u1)^2"), x0).values
    return GridFn(u1.grid, f0 - I, "f", deriv=-q * q, deriv2=-2.0 * q * dq,
                  meta={"f0": float(f0), "x0": float(x0)})


def sigma_minus(u1: GridFn, w: GridFn, x0: float) -> float:
    """``sigma_- = int_{x_l}^{x0} (w/u1)**2`` for a left-anchored ``w``.

    ``f`` is nodeless for ``f0 < -sigma_-``.
    """
    if w.meta.get("anchoring") == Anchoring.RIGHT.value:
        raise ConfigError("sigma_minus needs a left-anchored w; reflect the problem instead")
    if at_endpoint(u1.grid, x0) == "left":
        return 0.0
    q, _ = _ratio(u1, w)
    F = integral_from_endpoint(u1.with_values(q * q, "(w/u1)^2"), "left")
    return float(F.values[u1.grid.index_of(x0)])


def _singular(exc: NodeError, what: str) -> SingularTransformError:
    return SingularTransformError(exc.location, what)


def compute_v3_direct(V0: GridFn, u1: GridFn, f: GridFn) -> GridFn:
    """``V3 = V0 - 2 (ln u1)'' - 2 (ln f)''``."""
    same_grid(V0, u1, f)
    parts = []
    for fn, what in ((u1, "u1"), (f, "f")):
        try:
            parts.append(log_second_derivative(fn).values)
        except NodeError as exc:
            raise _singular(exc, what) from None
    return V0.with_values(V0.values - 2.0 * parts[0] - 2.0 * parts[1], "V3")


def compute_u_second_level(u1: GridFn, w: GridFn, c1: float, c2: float, x0: float) -> GridFn:
    """Eigenfunction of ``H2`` at ``eps``: ``-c2 (u1/w) (-c1/c2 - int_{x0}^x (w/u1)**2)``.

    The first and second derivatives are assembled by the product and
    quotient rules from the exact derivatives of ``u1``, ``w`` and ``f``.
    """
    if c2 == 0:
        raise ConfigError("c2 = 0 reduces u^(2) to the missing state u1/w; pass c2 != 0")
    try:
        check_nodeless(w, "w")
    except NodeError as exc:
        raise _singular(exc, "w") from None
    if u1.deriv2 is None or w.deriv2 is None:
        raise ConfigError("u1 and w must carry exact second derivatives")
    F = compute_f(u1, w, -c1 / c2, x0)
    u, du, ddu = u1.values, u1.deriv, u1.deriv2
    v, dv, ddv = w.values, w.deriv, w.deriv2
    a = u / v
    da = (du * v - u * dv) / v ** 2
    dda = ddu / v - 2 * du * dv / v ** 2 - u * ddv / v ** 2 + 2 * u * dv ** 2 / v ** 3
    vals = -c2 * a * F.values
    d1 = -c2 * (da * F.values + a * F.deriv)
    d2 = -c2 * (dda * F.values + 2 * da * F.deriv + a * F.deriv2)
    return GridFn(u1.grid, vals, "u^(2)", deriv=d1, deriv2=d2,
                  meta={"c1": float(c1), "c2": float(c2), "f0": -c1 / c2, "epsilon": w.meta.get("epsilon")})


def compute_v3_iterative(V2: GridFn, u_second_level: GridFn) -> GridFn:
    """``V3 = V2 - 2 (ln u^(2))''``."""
    same_grid(V2, u_second_level)
    try:
        lu = log_second_derivative(u_second_level)
    except NodeError as exc:
        raise _singular(exc, "u^(2)") from None
    return V2.with_values(V2.values - 2.0 * lu.values, "V3_iterative")


def _w13_anchor(u1: GridFn, u2: GridFn, u3: GridFn, x0: float) -> float:
    """``w1 = W(u1, u3)`` at ``x0``, using ``W(u1, u3)' = -u1 u2`` to reach a nominal endpoint."""
    i0 = u1.grid.index_of(x0)
    W13 = u1.values * first_derivative_values(u3) - first_derivative_values(u1) * u3.values
    A = anchored_integral(u1.with_values(u1.values * u2.values, "u1 u2"), x0).values
    return float(W13[i0] + A[i0])


def compute_u3(u1: GridFn, u1_tilde: GridFn, u2: GridFn, w1: Optional[float] = None,
               x0: Optional[float] = None) -> GridFn:
    """Third chain member, ``(H0 - eps) u3 = u2``, by variation of parameters.

    Without ``w1`` this is the particular solution vanishing with its slope
    at ``x0``. With ``w1`` a multiple of ``u1_tilde`` is added so that
    ``W(u1, u3)(x0) = w1``.
    """
    same_grid(u1, u1_tilde, u2)
    if x0 is None:
        x0 = u1.grid.x_min
    xs = float(u1.grid.x[u1.grid.index_of(x0)])
    phi = solve_inhomogeneous(u1, u1_tilde, u2, x0=xs)
    if w1 is None:
        return phi.with_values(phi.values, "u3", deriv=phi.deriv, deriv2=phi.deriv2)
    i0 = u1.grid.index_of(x0)
    W = float(u1.values[i0] * first_derivative_values(u1_tilde)[i0]
              - first_derivative_values(u1)[i0] * u1_tilde.values[i0])
    c = (w1 - _w13_anchor(u1, u2, phi, x0)) / W
    d2 = None
    if phi.deriv2 is not None and u1_tilde.deriv2 is not None:
        d2 = phi.deriv2 + c * u1_tilde.deriv2
    return GridFn(u1.grid, phi.values + c * u1_tilde.values, "u3",
                  deriv=phi.deriv + c * u1_tilde.deriv, deriv2=d2,
                  meta={"x0": float(x0), "u1_tilde_coefficient": c})


def wronskian3(u1: GridFn, u2: GridFn, u3: GridFn, x0: Optional[float] = None) -> GridFn:
    """``W(u1, u2, u3) = u1 W(u1, u3) - u2 W(u1, u2)``, first derivatives only.

    ``W(u1, u3) = w1 - int_{x0}^x u1 u2`` with ``w1`` read off ``u3`` at ``x0``.
    """
    same_grid(u1, u2, u3)
    if x0 is None:
        x0 = u1.grid.x_min
    d1, d2 = first_derivative_values(u1), first_derivative_values(u2)
    W12 = u1.values * d2 - d1 * u2.values
    w1 = _w13_anchor(u1, u2, u3, x0)
    A = anchored_integral(u1.with_values(u1.values * u2.values, "u1 u2"), x0).values
    W13 = w1 - A
    return GridFn(u1.grid, u1.values * W13 - u2.values * W12, "W(u1,u2,u3)",
                  meta={"w1": w1, "x0": float(x0)})


def wronskian3_determinant(u1: GridFn, u2: GridFn, u3: GridFn) -> GridFn:
    """Raw 3x3 Wronskian determinant with finite-difference derivatives."""
    same_grid(u1, u2, u3)
    h = u1.grid.h
    rows = []
    for fn in (u1, u2, u3):
        y = np.asarray(fn.values, dtype=float)
        rows.append((y, _derivative_array(y, h, 1), _derivative_array(y, h, 2)))
    (a, da, dda), (b, db, ddb), (c, dc, ddc) = rows
    det = (a * (db * ddc - dc * ddb) - b * (da * ddc - dc * dda) + c * (da * ddb - db * dda))
    return GridFn(u1.grid, det, "det W")


def apply_a3(u_second_level: GridFn, phi: GridFn) -> GridFn:
    """``A3+ phi = -phi' + (u^(2)'/u^(2)) phi``.

    ``phi'`` is the attached exact derivative when present, else finite
    differences.
    """
    same_grid(u_second_level, phi)
    try:
        check_nodeless(u_second_level, "u^(2)")
    except NodeError as exc:
        raise _singular(exc, "u^(2)") from None
    L = first_derivative_values(u_second_level) / u_second_level.values
    y = np.asarray(phi.values, dtype=float)
    d = phi.deriv if phi.deriv is not None else _derivative_array(y, phi.grid.h, 1)
    return GridFn(phi.grid, -d + L * y, f"A3+{phi.label}")


def apply_b3(b2coeffs: B2Coefficients, u_second_level: GridFn, psi: GridFn,
             energy: Optional[float] = None) -> GridFn:
    """``B3+ psi = A3+ (B2+ psi)``; ``energy`` as in :func:`apply_b2`."""
    out = apply_a3(u_second_level, apply_b2(b2coeffs, psi, energy))
    return out.with_values(out.values, f"B3+{psi.label}")


def map_eigenstate_3(b2coeffs: B2Coefficients, u_second_level: GridFn, psi_n: GridFn,
                     E_n: float, eps: Optional[float] = None) -> GridFn:
    """``B3+ psi_n / sqrt((E_n - eps)**3)``, renormalized; ``meta['raw_norm']`` is the norm before."""
    eps = b2coeffs.epsilon if eps is None else eps
    if not E_n > eps:
        raise ConfigError(f"mapping needs E_n > eps (E_n={E_n}, eps={eps})")
    img = apply_b3(b2coeffs, u_second_level, psi_n, energy=E_n).values / math.sqrt((E_n - eps) ** 3)
    raw = grid_norm(psi_n.with_values(img))
    return GridFn(psi_n.grid, img / raw, "psi_n^(3)", meta={"raw_norm": raw, "E": float(E_n)})


def _reference_point(u1: GridFn) -> int:
    """Index of the largest ``|u1|``, or the midpoint if it sits at an edge."""
    n = u1.grid.n_points
    i = int(np.argmax(np.abs(u1.values)))
    if i < TRIM or i > n - 1 - TRIM:
        return n // 2
    return i


def missing_state_3(u1: GridFn, w: GridFn, f: GridFn) -> GridFn:
    """State ``w/(u1 f)`` of ``H3`` at ``eps`` with a normalizability verdict.

    ``meta['status']`` is one of ``normalizable``,
    ``approaching-non-normalizable`` or ``non-normalizable``. The state is
    non-normalizable when an extrapolated end tail diverges or exceeds 1e-6
    of the grid norm. It is approaching non-normalizability when ``|f|`` at
    an end has fallen below ``APPROACH_RATIO`` times ``|f|`` at the seed's
    reference point: ``f`` is then close to acquiring a zero at that end and
    the norm, ``1/|f(x_l)| - 1/|f(x_r)|``, is dominated by the end region.
    ``meta['raw_norm']`` is the L2 norm of the un-normalized ``w/(u1 f)``.
    """
    same_grid(u1, w, f)
    for fn, what in ((u1, "u1"), (f, "f")):
        try:
            check_nodeless(fn, what)
        except NodeError as exc:
            raise _singular(exc, what) from None
    psi = u1.with_values(w.values / (u1.values * f.values), "w/(u1 f)")
    rep = normalizability(psi, rel=1e-6)
    raw = math.sqrt(rep["norm2_grid"])
    fref = abs(float(f.values[_reference_point(u1)]))
    margin = min(abs(float(f.values[0])), abs(float(f.values[-1]))) / fref
    if not rep["normalizable"]:
        status = "non-normalizable"
    elif margin < APPROACH_RATIO:
        status = "approaching-non-normalizable"
    else:
        status = "normalizable"
    vals = psi.values / raw if rep["normalizable"] else psi.values
    return GridFn(u1.grid, vals, "psi_eps^(3)",
                  meta={**rep, "status": status, "raw_norm": raw, "end_margin": margin})


def classify_regime(eps: float, E0: float, f0: float, sigma_minus: float,
                    seed_kind: SeedKind = SeedKind.NONPHYSICAL,
                    boundary_tol: Optional[float] = None) -> Regime:
    """Spectral outcome of the transformation.

    Nonphysical seed (``eps < E0``): ``f0 < -sigma_-`` adds a level at
    ``eps``; ``f0 = -sigma_-`` leaves the spectrum unchanged. Ground-state
    seed (``eps = E0``): ``f0 < -sigma_-`` is isospectral, ``f0 = -sigma_-``
    deletes ``E0``. ``f0 > -sigma_-`` makes ``V3`` singular.
    """
    seed_kind = SeedKind(seed_kind)
    if not math.isfinite(sigma_minus):
        raise ConfigError("sigma_minus must be finite")
    if eps > E0 and not math.isclose(eps, E0, rel_tol=1e-12, abs_tol=1e-14):
        raise ConfigError(f"eps = {eps} above E0 = {E0}: the seed cannot be nodeless")
    if seed_kind is SeedKind.GROUND_STATE and not math.isclose(eps, E0, rel_tol=1e-12, abs_tol=1e-14):
        raise ConfigError("a ground-state seed needs eps = E0")
    tol = 1e-9 * (1 + sigma_minus) if boundary_tol is None else boundary_tol
    if abs(f0 + sigma_minus) < tol:
        return Regime.GROUND_DELETED if seed_kind is SeedKind.GROUND_STATE else Regime.ISOSPECTRAL
    if f0 < -sigma_minus:
        return Regime.ISOSPECTRAL if seed_kind is SeedKind.GROUND_STATE else Regime.AUGMENTED
    return Regime.SINGULAR


def _reflect(fn: Optional[GridFn]) -> Optional[GridFn]:
    return None if fn is None else fn.reflected()


def transform(V0: GridFn, seed: GridFn, eps: float, f0: float, x0: Optional[float] = None,
              beta1: float = 0.0, anchoring: Anchoring = Anchoring.LEFT,
              seed_derivative=None, seed_kind: SeedKind = SeedKind.NONPHYSICAL,
              E0: float = math.inf) -> TransformResult:
    """Build the Jordan chain and both ``V3`` routes from a tabulated seed.

    ``w`` is anchored at the left end (``w <= 0``) or, for ``RIGHT``, at the
    right end by reflecting ``x -> -x`` and reusing the left-anchored path.
    Raises :class:`SingularTransformError` for ``f0`` outside the window,
    with the node location when it falls on the grid.
    """
    anchoring = Anchoring(anchoring)
    if anchoring is Anchoring.EXPLICIT:
        raise ConfigError("the transformation pipeline anchors w at an endpoint; "
                          "use compute_w directly for an explicit w0")
    if x0 is None:
        x0 = V0.grid.x_max if anchoring is Anchoring.RIGHT else V0.grid.x_min
    if anchoring is Anchoring.RIGHT:
        d = None if seed_derivative is None else -np.asarray(seed_derivative)[::-1]
        res = transform(V0.reflected(), seed.reflected(), eps, f0, -x0, beta1, Anchoring.LEFT,
                        d, seed_kind, E0)
        c = res.chain
        # reflection flips the sign of a Wronskian: W(u1, u2) = -w_mirror(-x) >= 0.
        # u2, u3, f, w0 and w1 stay those of the mirrored left-anchored chain.
        wr = c.w.reflected().scaled(-1.0)
        w = wr.with_values(wr.values, deriv=wr.deriv, deriv2=wr.deriv2, anchoring=Anchoring.RIGHT.value)
        chain = JordanChain(c.epsilon, V0, c.u1.reflected(), c.u1_tilde.reflected(),
                            _reflect(c.u2), _reflect(c.u3), w, _reflect(c.f),
                            c.beta1, c.f0, x0, c.w0, c.w1, Anchoring.RIGHT)
        return TransformResult(res.v3.reflected(), res.sigma_minus, res.f0_used, res.regime, chain,
                               _reflect(res.v2), _reflect(res.v3_iterative), _reflect(res.psi_eps),
                               res.singular_reason, res.node_at if res.node_at is None else -res.node_at)

    u1 = prepare_seed(seed, V0, eps, seed_derivative)
    w = compute_w(u1, Anchoring.LEFT)
    w0 = 0.0 if at_endpoint(V0.grid, x0) == "left" else w(x0)
    sigma = sigma_minus(u1, w, x0)
    regime = classify_regime(eps, E0, f0, sigma, seed_kind)
    f = compute_f(u1, w, f0, x0)
    if regime is Regime.SINGULAR:
        node = find_node(f.values, f.x)
        reason = f"f0 = {f0} is outside the window f0 < -sigma_- = {-sigma}"
        if node is None:
            raise SingularTransformError(math.nan, f"f ({reason}; node beyond the grid)")
        raise SingularTransformError(node, f"f ({reason})")
    v3 = compute_v3_direct(V0, u1, f)
    v2 = compute_v2(V0, w)
    u2 = compute_u2(u1, w, beta1, x0)
    u1t = second_solution(u1, second_solution_base(u1))
    u3 = compute_u3(u1, u1t, u2, w1=f0 + w0 * beta1, x0=x0)
    w1 = _w13_anchor(u1, u2, u3, x0)
    us = compute_u_second_level(u1, w, f0, -1.0, x0)
    v3i = compute_v3_iterative(v2, us)
    psi = missing_state_3(u1, w, f)
    chain = JordanChain(float(eps), V0, u1, u1t, u2, u3, w, f, float(beta1), float(f0),
                        float(x0), float(w0), w1, Anchoring.LEFT)
    return TransformResult(v3, sigma, float(f0), regime, chain, v2=v2, v3_iterative=v3i,
                           psi_eps=psi)


def transform_model(model: Model, f0: float, grid=None, x0: Optional[float] = None,
                    beta1: float = 0.0, anchoring: Anchoring = Anchoring.LEFT) -> TransformResult:
    """:func:`transform` for a declarative :class:`Model` on its default (or a given) grid."""
    if grid is None:
        if model.default_grid is None:
            raise ConfigError(f"model {model.name!r} has no default grid; pass one")
        grid = model.default_grid()
    if model.seed is None:
        raise ConfigError(f"model {model.name!r} has no analytic seed")
    V0 = tabulate(model, grid)
    seed = V0.with_values(model.seed(grid.x), "u1")
    d = None if model.seed_derivative is None else model.seed_derivative(grid.x)
    if x0 is None:
        x0 = model.params.get("x0", grid.x_min)
    return transform(V0, seed, model.epsilon, f0, x0, beta1, anchoring, d, model.seed_kind, model.E0)
