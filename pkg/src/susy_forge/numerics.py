"""
Grid calculus on uniform grids.

Cumulative quadrature, fourth-order finite differences, sign-free
logarithmic derivatives, Numerov integration of ``u'' = (V - eps) u``,
variation of parameters for the inhomogeneous equation, and an independent
eigensolver used for verification.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import (
    BoundaryKind, ConfigError, DivergentIntegralError, EigenSolveError, Grid, GridFn, Level,
    NodeError, SpectrumReport,
)

log = logging.getLogger(__name__)

NODE_FLOOR = 1e-12
TRIM = 5
TAIL_DECAY_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# quadrature

def _interval_integrals(y: np.ndarray, h: float) -> np.ndarray:
    """Integral over each ``[x_i, x_{i+1}]`` from a local cubic through 4 samples.

    Interior intervals use the centred cubic through ``i-1 .. i+2``; the
    first and last intervals take their cubic from the nearest four samples.
    Using one rule throughout keeps the error smooth from node to node, so
    it is not amplified when the cumulative integral is differentiated.
    """
    n = len(y)
    out = np.empty(n - 1)
    out[0] = h * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3]) / 24
    out[1: n - 2] = h * (-y[: n - 3] + 13 * y[1: n - 2] + 13 * y[2: n - 1] - y[3:]) / 24
    out[n - 2] = h * (y[n - 4] - 5 * y[n - 3] + 19 * y[n - 2] + 9 * y[n - 1]) / 24
    return out


def cumulative_integral(g: GridFn, x0: float) -> GridFn:
    """``F(x) = int_{x0}^{x} g``, with ``F(x0) = 0``.

    Per-interval cubic rules (exact for cubics at every node) accumulated
    outward from ``x0`` in both directions. Accumulating outward, rather
    than differencing one running sum, keeps full relative accuracy when
    ``g`` spans many decades. ``x0`` is snapped to the nearest sample and
    the snap is recorded in ``meta``.
    """
    y = g.values
    n = len(y)
    if n < 4:
        raise ConfigError("cumulative_integral needs at least 4 samples")
    if not np.all(np.isfinite(y[1:-1])):
        raise ConfigError(f"integrand {g.label!r} is not finite in the interior")
    y = np.where(np.isfinite(y), y, 0.0)
    grid = g.grid
    i0 = grid.index_of(x0)
    pieces = _interval_integrals(y, grid.h)
    F = np.zeros(n)
    F[i0 + 1:] = np.cumsum(pieces[i0:])
    F[:i0] = -np.cumsum(pieces[:i0][::-1])[::-1]
    x_snap = float(grid.x[i0])
    return GridFn(grid, F, f"int({g.label})", deriv=y,
                  meta={"x0": x_snap, "x0_requested": float(x0), "snap": x_snap - float(x0)})


def endpoint_tail(g: GridFn, side: str) -> float:
    """Estimate the integral of ``g`` between the last sample and the nominal endpoint.

    Near a truncated-infinite end the integrand is modelled as an exponential
    fitted to the two outermost samples, near a truncated-singular end as a
    power of the distance to the singular point times an exponential, fitted
    to the three outermost samples. Finite ends contribute 0. The integrand
    must keep one sign on those samples; the tail carries that sign. Returns
    ``+-inf`` when the model says the integral diverges.
    """
    grid = g.grid
    b = grid.left if side == "left" else grid.right
    if b.kind is BoundaryKind.FINITE:
        return 0.0
    y = g.values if side == "left" else g.values[::-1]
    y0, y1, y2 = float(y[0]), float(y[1]), float(y[2])
    if y0 == 0.0:
        return 0.0
    sign = math.copysign(1.0, y0)
    if y1 * sign <= 0.0 or y2 * sign <= 0.0:
        raise ConfigError(f"integrand {g.label!r} changes sign at the {side} endpoint")
    g0, g1, g2 = abs(y0), abs(y1), abs(y2)
    h = grid.h
    if b.kind is BoundaryKind.TRUNCATED_INFINITE:
        step = math.log(g1 / g0)
        # a ratio within rounding of 1 is a non-decaying integrand, not a huge finite tail
        return sign * (g0 * h / step if step > TAIL_DECAY_FLOOR else math.inf)
    # log g = c + p log d - kappa d through the three outermost samples
    d = np.array([b.offset, b.offset + h, b.offset + 2 * h])
    A = np.column_stack([np.ones(3), np.log(d), -d])
    _, p, kappa = np.linalg.solve(A, np.log([g0, g1, g2]))
    if p <= -1:
        return sign * math.inf
    # int_0^d0 (s/d0)^p e^{-kappa (s - d0)} ds as a series in kappa d0
    d0 = d[0]
    x = kappa * d0
    total, term, j = 0.0, 1.0, 0
    while True:
        piece = term / (p + 1 + j)
        total += piece
        if abs(piece) < 1e-17 * abs(total) or j > 200:
            break
        j += 1
        term *= -x / j
    return sign * g0 * d0 * math.exp(x) * total


def integral_from_endpoint(g: GridFn, side: str = "left") -> GridFn:
    """``int_{x_l}^{x} g`` (or ``int_{x}^{x_r} g``) including the truncated tail."""
    tail = endpoint_tail(g, side)
    if not math.isfinite(tail):
        raise DivergentIntegralError(f"integral of {g.label!r} diverges at the {side} endpoint")
    if side == "left":
        F = cumulative_integral(g, g.grid.x_min)
        return F.with_values(F.values + tail, deriv=g.values, tail=tail)
    F = cumulative_integral(g, g.grid.x_max)
    return F.with_values(tail - F.values, deriv=-g.values, tail=tail)


def at_endpoint(grid, x0: float) -> Optional[str]:
    """'left'/'right' if ``x0`` lies at or beyond a truncated end, else None.

    Base points on the first sample of a truncated end stand for the nominal
    endpoint itself (``r = 0`` for Coulomb, ``-inf`` for the free particle).
    """
    if grid.left.truncated and x0 <= grid.x_min:
        return "left"
    if grid.right.truncated and x0 >= grid.x_max:
        return "right"
    return None


def anchored_integral(g: GridFn, x0: float) -> GridFn:
    """``int_{x0}^x g`` where ``x0`` may be the nominal endpoint of a truncated end."""
    side = at_endpoint(g.grid, x0)
    if side == "left":
        return integral_from_endpoint(g, "left")
    if side == "right":
        F = integral_from_endpoint(g, "right")
        return F.with_values(-F.values, deriv=g.values)
    return cumulative_integral(g, x0)


def integrate(g: GridFn) -> float:
    """Definite integral over the whole grid (no tails)."""
    return float(cumulative_integral(g, g.grid.x_min).values[-1])


# ---------------------------------------------------------------------------
# differentiation

@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights for the given stencil offsets (unit spacing)."""
    offs = np.asarray(offsets, dtype=float)
    m = len(offs)
    A = np.vander(offs, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(A, rhs)


def _derivative_array(y: np.ndarray, h: float, order: int) -> np.ndarray:
    n = len(y)
    if n < 7:
        raise ConfigError("derivative needs at least 7 samples")
    out = np.empty(n)
    wc = fd_weights((-2, -1, 0, 1, 2), order)
    out[2:-2] = (wc[0] * y[:-4] + wc[1] * y[1:-3] + wc[2] * y[2:-2]
                 + wc[3] * y[3:-1] + wc[4] * y[4:])
    width = 5 if order == 1 else 6
    for i in (0, 1):
        wl = fd_weights(tuple(range(-i, width - i)), order)
        out[i] = wl @ y[:width]
        wr = fd_weights(tuple(range(i - width + 1, i + 1)), order)
        out[n - 1 - i] = wr @ y[n - width:]
    return out / h ** order


def derivative(g: GridFn, order: int = 1) -> GridFn:
    """Fourth-order finite-difference derivative (``order`` 1 or 2).

    Central five-point stencils in the interior, one-sided fourth-order
    stencils on the two outermost samples at each end.
    """
    if order not in (1, 2):
        raise ConfigError("derivative order must be 1 or 2")
    d = _derivative_array(np.asarray(g.values, dtype=float), g.grid.h, order)
    return GridFn(g.grid, d, f"d{order}({g.label})", meta={"edge_samples_one_sided": 2})


def first_derivative_values(g: GridFn) -> np.ndarray:
    """Exact first derivative if the function carries one, else finite differences."""
    if g.deriv is not None:
        return g.deriv
    return _derivative_array(np.asarray(g.values, dtype=float), g.grid.h, 1)


def find_node(values: np.ndarray, x: np.ndarray, floor: float = NODE_FLOOR) -> Optional[float]:
    """First interior node of a sampled function, or None.

    A node is a sign change between neighbouring interior samples or a sample
    that is negligible against both its neighbours. The floor is local, so
    seeds spanning many decades (``exp(kx)`` on ``[-20, 20]``) are not
    mistaken for vanishing ones.
    """
    v = values[1:-1]
    xi = x[1:-1]
    s = np.sign(v)
    change = np.nonzero(s[:-1] * s[1:] < 0)[0]
    nbr = np.maximum(np.abs(values[:-2]), np.abs(values[2:]))
    small = np.nonzero((np.abs(v) <= floor * nbr) | (v == 0))[0]
    cands = []
    if len(change):
        i = change[0]
        t = v[i] / (v[i] - v[i + 1])
        cands.append((i + t, xi[i] + t * (xi[i + 1] - xi[i])))
    if len(small):
        cands.append((float(small[0]), xi[small[0]]))
    if not cands:
        return None
    return float(min(cands)[1])


def check_nodeless(g: GridFn, what: Optional[str] = None, floor: float = NODE_FLOOR) -> None:
    node = find_node(g.values, g.grid.x, floor)
    if node is not None:
        raise NodeError(node, what or g.label or "function")


def log_derivative(g: GridFn) -> np.ndarray:
    """``g'/g`` without logarithms."""
    check_nodeless(g)
    return first_derivative_values(g) / g.values


def log_second_derivative(g: GridFn) -> GridFn:
    """``(ln g)''`` computed sign-free, so negative ``g`` is fine.

    With an exact ``g'`` and ``g''`` attached the pointwise form
    ``g''/g - (g'/g)**2`` is used; with only ``g'`` the ratio ``g'/g`` is
    differenced once; otherwise both derivatives come from finite
    differences. Raises :class:`NodeError` if ``g`` has an interior node.
    """
    check_nodeless(g)
    y = g.values
    if g.deriv is not None and g.deriv2 is not None:
        r = g.deriv / y
        out = g.deriv2 / y - r * r
    else:
        r = first_derivative_values(g) / y
        out = _derivative_array(r, g.grid.h, 1)
    return GridFn(g.grid, out, f"(ln {g.label})''")


def interior(a: np.ndarray, trim: int = TRIM) -> np.ndarray:
    return np.asarray(a)[trim: len(a) - trim]


# ---------------------------------------------------------------------------
# linear ODEs

RESCALE_AT = 1e250


def _numerov(q: list, h: float, u0: float, u1: float) -> tuple[list, list]:
    """March ``u'' = q u`` forward. Returns values and the applied rescale factors."""
    n = len(q)
    c = h * h / 12.0
    u = [0.0] * n
    u[0], u[1] = u0, u1
    scales = []
    for i in range(1, n - 1):
        un = (2.0 * (1.0 + 5.0 * c * q[i]) * u[i] - (1.0 - c * q[i - 1]) * u[i - 1]) / (1.0 - c * q[i + 1])
        u[i + 1] = un
        if abs(un) > RESCALE_AT:
            f = 1.0 / RESCALE_AT
            for j in range(i + 2):
                u[j] *= f
            scales.append((i + 1, RESCALE_AT))
    return u, scales


def solve_homogeneous(V0: GridFn, eps: float, direction: str = "left-to-right",
                      ic: Optional[tuple[float, float]] = None,
                      start: Optional[tuple[float, float]] = None) -> GridFn:
    """Numerov solution of ``u'' = (V0 - eps) u``.

    Give either ``ic = (value, slope)`` at the starting end, or ``start`` with
    the values at the first two samples (useful when a series expansion is
    known near a singular endpoint). The ``direction`` selects the starting
    end. Normalization is left to the caller. If the solution approaches
    overflow, the part already computed is rescaled and the factors are
    recorded in ``meta['rescales']``.
    """
    if (ic is None) == (start is None):
        raise ConfigError("give exactly one of ic=(value, slope) or start=(u0, u1)")
    if direction not in ("left-to-right", "right-to-left"):
        raise ConfigError(f"unknown direction {direction!r}")
    forward = direction == "left-to-right"
    q = np.asarray(V0.values, dtype=float) - eps
    if not forward:
        q = q[::-1]
    h = V0.grid.h
    if start is not None:
        u0, u1 = map(float, start)
        if u0 == 0.0 and u1 == 0.0:
            raise ConfigError("initial data must not vanish identically")
    else:
        val, slope = map(float, ic)
        if val == 0.0 and slope == 0.0:
            raise ConfigError("initial data must not vanish identically")
        if not forward:
            slope = -slope
        # Taylor step to O(h^5) using u'' = q u and its derivatives
        qd = _derivative_array(q[:8], h, 1)
        qdd = _derivative_array(q[:8], h, 2)
        u2 = q[0] * val
        u3 = qd[0] * val + q[0] * slope
        u4 = qdd[0] * val + 2 * qd[0] * slope + q[0] * u2
        u0 = val
        u1 = val + h * slope + h ** 2 / 2 * u2 + h ** 3 / 6 * u3 + h ** 4 / 24 * u4
    u, scales = _numerov(q.tolist(), h, u0, u1)
    u = np.asarray(u)
    if not forward:
        u = u[::-1]
    if scales:
        log.info("numerov rescaled %d times (factor %g each)", len(scales), RESCALE_AT)
    return GridFn(V0.grid, u, "u", meta={"rescales": scales, "epsilon": eps, "direction": direction})


def second_solution(u1: GridFn, x0: float) -> GridFn:
    """Second homogeneous solution ``u1 * int_{x0}^x dy / u1**2`` with ``W(u1, .) = 1``.

    ``x0`` may be the nominal endpoint of a truncated end (see
    :func:`anchored_integral`), which gives the solution recessive there.
    """
    check_nodeless(u1, "u1")
    inv = u1.with_values(1.0 / u1.values ** 2, "1/u1^2")
    I = anchored_integral(inv, x0).values
    d1 = first_derivative_values(u1)
    vals = u1.values * I
    deriv = d1 * I + 1.0 / u1.values
    deriv2 = None if u1.deriv2 is None else u1.deriv2 * I
    side = at_endpoint(u1.grid, x0)
    base = float(u1.grid.x[u1.grid.index_of(x0)]) if side is None else side
    return GridFn(u1.grid, vals, "u1_tilde", deriv=deriv, deriv2=deriv2, meta={"x0": base})


def second_solution_base(u1: GridFn):
    """Base point giving a well-conditioned pair ``(u1, u1_tilde)``.

    If ``1/u1**2`` is integrable toward a truncated end, the base is that end
    and ``u1_tilde`` is recessive there; otherwise the sample where ``|u1|``
    peaks.
    """
    inv = u1.with_values(1.0 / u1.values ** 2, "1/u1^2")
    grid = u1.grid
    for side, xb in (("right", grid.x_max), ("left", grid.x_min)):
        b = grid.right if side == "right" else grid.left
        if not b.truncated:
            continue
        try:
            t = endpoint_tail(inv, side)
        except ConfigError:
            continue
        if math.isfinite(t):
            return xb
    n = grid.n_points
    i = int(np.argmax(np.abs(u1.values[TRIM: n - TRIM]))) + TRIM
    return float(grid.x[i])


def wronskian(a: GridFn, b: GridFn) -> np.ndarray:
    return a.values * first_derivative_values(b) - first_derivative_values(a) * b.values


def solve_inhomogeneous(u1: GridFn, u1_tilde: GridFn, source: GridFn,
                        x0: Optional[float] = None, wronskian_tol: float = 1e-6) -> GridFn:
    """Particular solution of ``-phi'' + (V0 - eps) phi = source``.

    ``u1`` and ``u1_tilde`` are homogeneous solutions with unit Wronskian;
    then ``phi = u1 * int(u1_tilde * s) - u1_tilde * int(u1 * s)``, which
    vanishes together with its derivative at ``x0``.
    """
    a = u1.values * first_derivative_values(u1_tilde)
    b = first_derivative_values(u1) * u1_tilde.values
    # deviation relative to the size of the cancelling products
    dev = float(np.max(interior(np.abs(a - b - 1.0) / (1.0 + np.abs(a) + np.abs(b)))))
    if dev > wronskian_tol:
        raise ConfigError(f"homogeneous pair does not have unit Wronskian (max deviation {dev:.3g})")
    if x0 is None:
        x0 = u1.grid.x_min
    s = source.values
    A = cumulative_integral(source.with_values(u1_tilde.values * s), x0).values
    B = cumulative_integral(source.with_values(u1.values * s), x0).values
    phi = u1.values * A - u1_tilde.values * B
    dphi = first_derivative_values(u1) * A - first_derivative_values(u1_tilde) * B
    d2 = None
    if u1.deriv2 is not None and u1_tilde.deriv2 is not None:
        d2 = u1.deriv2 * A - u1_tilde.deriv2 * B - s
    return GridFn(u1.grid, phi, "phi", deriv=dphi, deriv2=d2, meta={"x0": float(x0)})


def schrodinger_residual(psi: GridFn, V: GridFn, E: float, source: Optional[GridFn] = None,
                         trim: int = TRIM, scale: str = "reference") -> float:
    """Relative sup-norm of ``-psi'' + (V - E) psi - source`` on the trimmed interior.

    With ``scale='reference'`` the denominator is ``max |source|`` when a
    source is given, else ``max |psi|``. With ``scale='terms'`` it is
    ``max(|psi''| + |(V - E) psi| + |source|)``, the size of the terms that
    cancel; use it when ``psi`` dwarfs the source (a growing ``u2`` driven by
    a decaying ``u1``), where the reference scale sits below rounding.
    ``psi''`` is always taken by finite differences, independent of any
    attached exact derivative.
    """
    d2 = _derivative_array(np.asarray(psi.values, dtype=float), psi.grid.h, 2)
    pot = (V.values - E) * psi.values
    r = -d2 + pot
    ref = psi.values
    if source is not None:
        r = r - source.values
        ref = source.values
    if scale == "terms":
        s = np.abs(d2) + np.abs(pot) + (0.0 if source is None else np.abs(source.values))
        return float(np.max(np.abs(interior(r, trim))) / np.max(interior(s, trim)))
    if scale != "reference":
        raise ConfigError(f"unknown residual scale {scale!r}")
    return float(np.max(np.abs(interior(r, trim))) / np.max(np.abs(interior(ref, trim))))


# ---------------------------------------------------------------------------
# eigensolver

@dataclass(frozen=True)
class EigenSolveConfig:
    n_levels: int = 3
    method: str = "dense-tridiagonal"
    energy_bracket: tuple[float, float] = (-10.0, 0.0)
    tolerance: float = 1e-3

    def __post_init__(self):
        lo, hi = self.energy_bracket
        if not lo < hi:
            raise ConfigError("energy bracket needs E_lo < E_hi")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.n_levels < 1:
            raise ConfigError("n_levels must be >= 1")
        if self.method not in ("dense-tridiagonal", "numerov-shooting"):
            raise ConfigError(f"unknown eigensolver method {self.method!r}")


def _continuum_residual(full: np.ndarray, V: np.ndarray, E: float, h: float) -> float:
    """Sup-norm residual of a discrete eigenvector under the fourth-order operator.

    The three-point eigenvector is exact for its own matrix; measuring it
    against the five-point Laplacian exposes the discretization error.
    """
    d2 = _derivative_array(full, h, 2)
    r = -d2 + (V - E) * full
    return float(np.max(np.abs(interior(r))) / np.max(np.abs(full)))


def _wall_offsets(V: GridFn) -> tuple[float, float]:
    """Distance from the outer samples to the Dirichlet walls.

    Walls sit on the outer samples themselves, except at a truncated-singular
    end where the wall is placed at the nominal singular point.
    """
    g = V.grid
    lw = g.left.offset if g.left.kind is BoundaryKind.TRUNCATED_SINGULAR else 0.0
    rw = g.right.offset if g.right.kind is BoundaryKind.TRUNCATED_SINGULAR else 0.0
    return lw, rw


def _dense(V: GridFn, cfg: EigenSolveConfig) -> list[Level]:
    h = V.grid.h
    v = np.asarray(V.values, dtype=float)
    n = len(v)
    lw, rw = _wall_offsets(V)
    i0 = 0 if lw > 0 else 1
    i1 = n if rw > 0 else n - 1
    d = 2.0 / h ** 2 + v[i0:i1]
    e = np.full(len(d) - 1, -1.0 / h ** 2)
    # unequal spacing to a wall off the grid; the diagonal similarity that
    # symmetrizes the row leaves the eigenvalues unchanged
    if lw > 0:
        d[0] = 2.0 / (lw * h) + v[0]
        e[0] = -math.sqrt(2.0 / (h * (lw + h))) / h
    if rw > 0:
        d[-1] = 2.0 / (rw * h) + v[-1]
        e[-1] = -math.sqrt(2.0 / (h * (rw + h))) / h
    lo, hi = cfg.energy_bracket
    # Sturm-sequence bisection (LAPACK stebz) for the eigenvalues in the bracket
    vals = eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(lo, hi))
    if len(vals) == 0:
        return []
    first = len(eigh_tridiagonal(d, e, eigvals_only=True, select="v", select_range=(-np.inf, lo)))
    k = min(cfg.n_levels, len(vals))
    w, vecs = eigh_tridiagonal(d, e, select="i", select_range=(first, first + k - 1))
    levels = []
    for j in range(k):
        full = np.zeros(n)
        full[i0:i1] = vecs[:, j]
        if lw > 0:
            full[0] *= math.sqrt(2.0 * h / (lw + h))
        if rw > 0:
            full[-1] *= math.sqrt(2.0 * h / (rw + h))
        levels.append(Level(first + j, float(w[j]), _continuum_residual(full, v, float(w[j]), h)))
    return levels


def _count_nodes(q: list, h: float) -> tuple[int, float]:
    u, _ = _numerov(q, h, 0.0, 1e-30)
    nodes = 0
    prev = 0.0
    for val in u[1:-1]:
        if val != 0.0:
            if prev != 0.0 and (val > 0) != (prev > 0):
                nodes += 1
            prev = val
    end = u[-1]
    if end != 0.0 and prev != 0.0 and (end > 0) != (prev > 0):
        nodes += 1
    return nodes, end


def _shooting(V: GridFn, cfg: EigenSolveConfig) -> list[Level]:
    h = V.grid.h
    v = np.asarray(V.values, dtype=float)
    lo, hi = cfg.energy_bracket
    below_lo, _ = _count_nodes((v - lo).tolist(), h)
    below_hi, _ = _count_nodes((v - hi).tolist(), h)
    if below_hi <= below_lo:
        return []
    levels = []
    for n in range(below_lo, min(below_hi, below_lo + cfg.n_levels)):
        a, b = lo, hi
        while b - a > 1e-3 * cfg.tolerance * max(1.0, abs(a)):
            mid = 0.5 * (a + b)
            count, _ = _count_nodes((v - mid).tolist(), h)
            if count > n:
                b = mid
            else:
                a = mid
        E = 0.5 * (a + b)
        levels.append(Level(n, E, 0.5 * (b - a)))
    return levels


def _richardson(V: GridFn, cfg: EigenSolveConfig, solver, levels: list) -> list:
    """Per-level error estimate ``|E_h - E_2h| / 3`` from the grid of double spacing.

    The three-point scheme is second order, so the difference to the coarse
    solve overestimates the fine-grid error by about a factor 3. Levels the
    coarse grid cannot resolve get ``inf``.
    """
    g = V.grid
    m = (g.n_points - 1) // 2
    if m + 1 < 8:
        return [math.inf] * len(levels)
    coarse = Grid(g.x_min, g.x_min + 2 * m * g.h, m + 1, g.left, g.right)
    Vc = GridFn(coarse, V.values[: 2 * m + 1: 2], V.label)
    lo = cfg.energy_bracket[0]
    hi = max(cfg.energy_bracket[1], max(lv.E for lv in levels) + 1e-12)
    wide = EigenSolveConfig(len(levels) + 1, cfg.method, (lo, hi), cfg.tolerance)
    coarse_E = {lv.index: lv.E for lv in solver(Vc, wide)}
    return [abs(lv.E - coarse_E[lv.index]) / 3 if lv.index in coarse_E else math.inf
            for lv in levels]


def continuum_threshold(V: GridFn) -> float:
    """Lowest potential value at a truncated-infinite end, ``inf`` for a closed box.

    On a truncated infinite domain, box states above this value are
    discretized continuum, not bound states.
    """
    g = V.grid
    ends = []
    if g.left.kind is BoundaryKind.TRUNCATED_INFINITE:
        ends.append(float(V.values[0]))
    if g.right.kind is BoundaryKind.TRUNCATED_INFINITE:
        ends.append(float(V.values[-1]))
    return min(ends) if ends else math.inf


def eigensolve(V: GridFn, cfg: EigenSolveConfig) -> SpectrumReport:
    """Lowest ``cfg.n_levels`` Dirichlet bound-state eigenvalues of ``-d^2/dx^2 + V`` in the bracket.

    The bracket is capped at :func:`continuum_threshold`; a bracket lying
    entirely in the continuum, or a bracket holding no level, raises
    :class:`EigenSolveError` with the matching ``reason``. ``dense-tridiagonal`` uses
    the three-point Laplacian with Sturm bisection; each level's residual is
    the eigenvector's defect under the fourth-order operator.
    ``numerov-shooting`` bisects on the node count of Numerov solutions and
    reports the final bracket half-width as its residual. ``meta`` carries a
    Richardson error estimate per level and lists as ``too_coarse`` the
    levels whose residual exceeds ``10 * tolerance`` or whose estimate
    exceeds ``tolerance``.
    """
    if not np.all(np.isfinite(V.values[1:-1])):
        raise ConfigError("potential must be finite in the interior")
    lo, hi = cfg.energy_bracket
    top = continuum_threshold(V)
    if lo >= top:
        raise EigenSolveError(f"bracket ({lo}, {hi}] lies in the continuum above {top:.6g}",
                              reason="continuum")
    run = EigenSolveConfig(cfg.n_levels, cfg.method, (lo, min(hi, top)), cfg.tolerance)
    solver = _dense if cfg.method == "dense-tridiagonal" else _shooting
    levels = solver(V, run)
    if not levels:
        raise EigenSolveError(f"no eigenvalue in the bracket ({lo}, {min(hi, top):.6g}]")
    estimates = _richardson(V, run, solver, levels)
    too_coarse = [lv.index for lv, est in zip(levels, estimates)
                  if lv.residual > 10 * cfg.tolerance or est > cfg.tolerance]
    if too_coarse:
        log.warning("discretization too coarse for levels %s", too_coarse)
    return SpectrumReport(tuple(levels), meta={
        "method": cfg.method, "bracket": list(cfg.energy_bracket), "searched": [lo, min(hi, top)],
        "error_estimate": estimates,
        "tolerance": cfg.tolerance, "too_coarse": too_coarse, "grid": V.grid.describe()})
