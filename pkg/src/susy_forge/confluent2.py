"""
Confluent second-order transformation.

Everything here is built from one seed ``u1`` with ``(H0 - eps) u1 = 0``:
the Wronskian ``w = W(u1, u2) = w0 - int u1**2``, the partner potential
``V2 = V0 - 2 (ln w)''``, the intertwiner ``B2+ = d^2 - eta d + gamma`` and
the images of bound states under it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Anchoring, ConfigError, DivergentIntegralError, GridFn, NodeError, SingularTransformError,
    same_grid,
)
from .numerics import (
    _derivative_array, anchored_integral, at_endpoint, check_nodeless, cumulative_integral,
    endpoint_tail, first_derivative_values, integral_from_endpoint, log_second_derivative,
)


def prepare_seed(u1: GridFn, V0: GridFn, eps: float, derivative=None) -> GridFn:
    """Attach ``u1'`` and ``u1'' = (V0 - eps) u1`` to a tabulated seed.

    ``derivative`` may hold exact values of ``u1'``; otherwise the first
    derivative comes from finite differences of the samples.
    """
    same_grid(u1, V0)
    y = np.asarray(u1.values, dtype=float)
    if not np.any(y):
        raise ConfigError("degenerate seed: u1 vanishes identically")
    if derivative is None:
        d1 = _derivative_array(y, u1.grid.h, 1)
    else:
        d1 = np.asarray(derivative, dtype=float)
    d2 = (V0.values - eps) * y
    return GridFn(u1.grid, y, "u1", deriv=d1, deriv2=d2, meta={**u1.meta, "epsilon": float(eps)})


def _epsilon(fn: GridFn) -> Optional[float]:
    e = fn.meta.get("epsilon")
    return None if e is None else float(e)


def compute_w(u1: GridFn, anchoring: Anchoring = Anchoring.LEFT, w0: Optional[float] = None,
              x0: Optional[float] = None) -> GridFn:
    """Wronskian ``w = W(u1, u2)`` of the length-2 chain, ``w' = -u1**2``.

    ``LEFT`` fixes ``w(x_l) = 0`` (so ``w <= 0``), ``RIGHT`` fixes
    ``w(x_r) = 0`` (so ``w >= 0``), ``EXPLICIT`` uses ``w(x0) = w0``.
    The exact ``w'`` and ``w''`` are attached.
    """
    if not np.any(u1.values):
        raise ConfigError("degenerate seed: u1 vanishes identically")
    anchoring = Anchoring(anchoring)
    sq = u1.with_values(u1.values ** 2, "u1^2")
    if anchoring is Anchoring.LEFT:
        vals = -integral_from_endpoint(sq, "left").values
    elif anchoring is Anchoring.RIGHT:
        vals = integral_from_endpoint(sq, "right").values
    else:
        if w0 is None or x0 is None:
            raise ConfigError("explicit anchoring needs both w0 and x0")
        vals = w0 - anchored_integral(sq, x0).values
    d1 = first_derivative_values(u1)
    meta = {"anchoring": anchoring.value}
    if _epsilon(u1) is not None:
        meta["epsilon"] = _epsilon(u1)
    return GridFn(u1.grid, vals, "w", deriv=-sq.values, deriv2=-2.0 * u1.values * d1, meta=meta)


def w_windows(u1: GridFn, x0: float) -> tuple[float, float]:
    """``(nu_minus, nu_plus)``: ``int u1**2`` from each endpoint to ``x0``.

    A divergent side is reported as ``inf``. ``w`` is nodeless for
    ``w0 <= -nu_minus`` or ``w0 >= nu_plus``.
    """
    sq = u1.with_values(u1.values ** 2, "u1^2")
    F = cumulative_integral(sq, x0)
    out = []
    for side in ("left", "right"):
        tail = endpoint_tail(sq, side)
        if not math.isfinite(tail):
            out.append(math.inf)
            continue
        inner = -F.values[0] if side == "left" else F.values[-1]
        out.append(float(inner + tail))
    if at_endpoint(u1.grid, x0) == "left":
        out[0] = 0.0
    elif at_endpoint(u1.grid, x0) == "right":
        out[1] = 0.0
    return out[0], out[1]


def compute_v2(V0: GridFn, w: GridFn) -> GridFn:
    """``V2 = V0 - 2 (ln w)''``."""
    same_grid(V0, w)
    try:
        lw = log_second_derivative(w)
    except NodeError as exc:
        raise SingularTransformError(exc.location, "w") from None
    return V0.with_values(V0.values - 2.0 * lw.values, "V2")


@dataclass(frozen=True, eq=False)
class B2Coefficients:
    """``B2+ = d^2/dx^2 - eta d/dx + gamma``.

    ``deta``, ``ddeta`` and ``V0`` are kept so that images of eigenfunctions
    of ``H0`` can be formed without differencing twice (see :func:`apply_b2`).
    """

    eta: GridFn
    gamma: GridFn
    epsilon: float
    deta: Optional[np.ndarray] = None
    ddeta: Optional[np.ndarray] = None
    V0: Optional[GridFn] = None


def b2_coefficients(V0: GridFn, w: GridFn, eps: float) -> B2Coefficients:
    """``eta = w'/w`` and ``gamma = eta'/2 + eta**2/2 - V0 + eps``."""
    same_grid(V0, w)
    we = _epsilon(w)
    if we is not None and not math.isclose(we, eps, rel_tol=1e-12, abs_tol=1e-14):
        raise ConfigError(f"epsilon {eps} does not match the chain's epsilon {we}")
    try:
        check_nodeless(w, "w")
    except NodeError as exc:
        raise SingularTransformError(exc.location, "w") from None
    eta = first_derivative_values(w) / w.values
    deta = log_second_derivative(w).values
    gamma = deta / 2 + eta ** 2 / 2 - V0.values + eps
    ddeta = None
    if w.deriv is not None and w.deriv2 is not None and np.all(w.deriv != 0):
        # w' = -u1^2 gives w''' = w''^2 / (2 w') + 2 (V0 - eps) w'
        d1, d2 = w.deriv, w.deriv2
        d3 = d2 ** 2 / (2 * d1) + 2 * (V0.values - eps) * d1
        ddeta = d3 / w.values - 3 * d2 * d1 / w.values ** 2 + 2 * eta ** 3
    return B2Coefficients(w.with_values(eta, "eta"), w.with_values(gamma, "gamma"), float(eps),
                          deta=deta, ddeta=ddeta, V0=V0)


def apply_b2(coeffs: B2Coefficients, psi: GridFn, energy: Optional[float] = None) -> GridFn:
    """``psi'' - eta psi' + gamma psi``.

    By default both derivatives of ``psi`` come from finite differences; the
    two outermost samples at each end use one-sided stencils and are flagged
    in ``meta`` as reduced accuracy. If ``psi`` is an eigenfunction of ``H0``
    at ``energy``, pass it: then ``psi'' = (V0 - E) psi`` and the exact
    derivative of the image is attached, so nothing is differenced twice
    (each extra pass amplifies rounding by ``h**-2``).
    """
    same_grid(coeffs.eta, psi)
    y = np.asarray(psi.values, dtype=float)
    eta, gamma = coeffs.eta.values, coeffs.gamma.values
    if energy is None:
        d1 = _derivative_array(y, psi.grid.h, 1)
        d2 = _derivative_array(y, psi.grid.h, 2)
        out = d2 - eta * d1 + gamma * y
        return GridFn(psi.grid, out, f"B2+{psi.label}", meta={"reduced_accuracy_edges": 2})
    if coeffs.V0 is None or coeffs.ddeta is None:
        raise ConfigError("eigenfunction images need coefficients built by b2_coefficients")
    d1 = first_derivative_values(psi)
    q = coeffs.V0.values - energy
    out = q * y - eta * d1 + gamma * y
    # (B2+ psi)' using psi''' = V0' psi + q psi'; the V0' terms cancel against gamma'
    dout = (q - coeffs.deta + gamma) * d1 + (coeffs.ddeta / 2 + eta * coeffs.deta - eta * q) * y
    return GridFn(psi.grid, out, f"B2+{psi.label}", deriv=dout,
                  meta={"reduced_accuracy_edges": 2, "energy": float(energy)})


def grid_norm(psi: GridFn) -> float:
    """L2 norm on the grid (no endpoint tails)."""
    sq = psi.with_values(np.asarray(psi.values) ** 2)
    return math.sqrt(float(cumulative_integral(sq, psi.grid.x_min).values[-1]))


def map_eigenstate_2(coeffs: B2Coefficients, psi_n: GridFn, E_n: float) -> GridFn:
    """Image ``B2+ psi_n / (E_n - eps)`` of a normalized bound state, renormalized.

    ``meta['raw_norm']`` holds the norm before renormalization, which should
    already be close to 1.
    """
    if E_n == coeffs.epsilon:
        raise ConfigError("E_n equals the factorization energy; the image vanishes")
    img = apply_b2(coeffs, psi_n, energy=E_n).values / (E_n - coeffs.epsilon)
    raw = grid_norm(psi_n.with_values(img))
    return GridFn(psi_n.grid, img / raw, "psi_n^(2)", meta={"raw_norm": raw, "E": float(E_n)})


def normalizability(psi: GridFn, rel: float = 1e-6) -> dict:
    """Report whether a sampled state has converged norm at both ends.

    The tails beyond the truncation are extrapolated from the outermost
    samples of ``psi**2``; the state counts as normalizable if both tails are
    finite and below ``rel`` times the grid norm squared.
    """
    sq = psi.with_values(np.asarray(psi.values) ** 2, "psi^2")
    total = float(cumulative_integral(sq, psi.grid.x_min).values[-1])
    tails = {}
    for side in ("left", "right"):
        try:
            tails[side] = endpoint_tail(sq, side)
        except ConfigError:
            tails[side] = math.inf
    ok = all(math.isfinite(t) and t <= rel * total for t in tails.values())
    return {"normalizable": bool(ok), "norm2_grid": total,
            "tail_left": tails["left"], "tail_right": tails["right"]}


def missing_state_2(u1: GridFn, w: GridFn) -> GridFn:
    """State ``u1/w`` annihilated by ``B2-``, an eigenfunction of ``H2`` at ``eps``.

    Normalized on the grid when its norm converges; ``meta`` carries the
    normalizability report and the raw norm (the factor hidden in ``∝``).
    """
    same_grid(u1, w)
    try:
        check_nodeless(w, "w")
    except NodeError as exc:
        raise SingularTransformError(exc.location, "w") from None
    psi = u1.with_values(u1.values / w.values, "u1/w")
    rep = normalizability(psi, rel=1e-8)
    raw = math.sqrt(rep["norm2_grid"])
    status = "normalizable" if rep["normalizable"] else "non-normalizable"
    vals = psi.values / raw if rep["normalizable"] else psi.values
    return GridFn(u1.grid, vals, "psi_eps^(2)", meta={**rep, "status": status, "raw_norm": raw})


def compute_u2(u1: GridFn, w: GridFn, beta1: float = 0.0, x0: Optional[float] = None) -> GridFn:
    """Second chain member ``u2 = u1 (beta1 + int_{x0}^x w/u1**2)``.

    Satisfies ``(H0 - eps) u2 = u1`` and ``W(u1, u2) = w``. Exact first and
    second derivatives are attached when ``u1`` carries them.
    """
    same_grid(u1, w)
    check_nodeless(u1, "u1")
    if x0 is None:
        x0 = u1.grid.x_min
    ratio = w.values / u1.values ** 2
    if not np.all(np.isfinite(ratio)):
        raise DivergentIntegralError("w/u1^2 is not finite on the grid")
    J = anchored_integral(u1.with_values(ratio, "w/u1^2"), x0).values
    d1 = first_derivative_values(u1)
    vals = u1.values * (beta1 + J)
    deriv = d1 * (beta1 + J) + w.values / u1.values
    deriv2 = None
    if u1.deriv2 is not None and w.deriv is not None:
        deriv2 = u1.deriv2 * (beta1 + J) + w.deriv / u1.values
    return GridFn(u1.grid, vals, "u2", deriv=deriv, deriv2=deriv2,
                  meta={"beta1": float(beta1), "x0": float(x0)})
