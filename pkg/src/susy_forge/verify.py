"""
Executable checks for the partner-potential constructions.

Every check becomes a :class:`Check` record carrying its value, threshold and
grid metadata; a :class:`Report` collects them and serializes to JSON with
the hash of the configuration that produced it. Residuals are sup-norms over
the interior with the common trim of 5 samples per edge.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .confluent2 import apply_b2, b2_coefficients, map_eigenstate_2
from .core import (
    ConfigError, EigenSolveError, Grid, GridFn, Regime, SingularTransformError, SpectrumReport, SusyError, same_grid,
)
from .hyperconfluent3 import (
    apply_b3, compute_u_second_level, map_eigenstate_3, transform_model, wronskian3,
    wronskian3_determinant,
)
from .models import coulomb_pack, free_particle_pack, local_minimum
from .numerics import TRIM, _derivative_array, EigenSolveConfig, eigensolve, interior

log = logging.getLogger(__name__)

KERNEL_TOL = 1e-4


# ---------------------------------------------------------------------------
# records

@dataclass
class Check:
    """One verification outcome. ``relation`` says how value and threshold compare when passing."""

    name: str
    value: float
    threshold: float
    passed: bool
    meta: dict = field(default_factory=dict)
    relation: str = "<"

    def to_dict(self) -> dict:
        return {"name": self.name, "value": _json_float(self.value), "threshold": self.threshold,
                "relation": self.relation, "pass": bool(self.passed), "meta": jsonable(self.meta)}


def check(name: str, value: float, threshold: float, relation: str = "<", **meta) -> Check:
    value = float(value)
    if relation == "<":
        ok = value < threshold
    elif relation == ">":
        ok = value > threshold
    else:
        raise ConfigError(f"unknown relation {relation!r}")
    return Check(name, value, float(threshold), bool(ok and math.isfinite(value)), meta, relation)


def _json_float(v: float):
    # JSON has no inf/nan; keep them readable as strings
    return v if math.isfinite(v) else repr(v)


def jsonable(obj):
    """``obj`` with numpy scalars, enums and non-finite floats made JSON-safe."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return _json_float(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(getattr(obj, "value", None), str):
        return obj.value
    return obj


def config_hash(config: dict) -> str:
    """Short SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass
class Report:
    checks: list
    config: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"checks": [c.to_dict() for c in self.checks], "config_hash": config_hash(self.config),
                "passed": self.passed}


# ---------------------------------------------------------------------------
# primitive checks

def sup_relative(a: np.ndarray, ref: np.ndarray, trim: int = TRIM) -> float:
    """``max|a - ref| / max|ref|`` over the interior."""
    ref_i = interior(np.asarray(ref), trim)
    return float(np.max(np.abs(interior(np.asarray(a), trim) - ref_i)) / np.max(np.abs(ref_i)))


def kernel_ratio(image: GridFn, psi: GridFn, trim: int = TRIM) -> float:
    """``max|Op psi| / max|psi|`` over the interior; small means ``psi`` is in the kernel."""
    return float(np.max(np.abs(interior(image.values, trim)))
                 / np.max(np.abs(interior(psi.values, trim))))


@dataclass(frozen=True)
class Intertwining:
    """Outcome of an intertwining check: a residual, or a kernel-member flag."""

    residual: float
    kernel_member: bool
    image_ratio: float


def intertwining_residual(V_target: GridFn, applier: Callable[[GridFn], GridFn], psi: GridFn,
                          E: float, trim: int = TRIM, kernel_tol: float = KERNEL_TOL) -> Intertwining:
    """``||(-d^2 + V_target - E)(Op psi)|| / ||Op psi||`` over the interior.

    If the image is negligible relative to ``psi`` (``psi`` lies in the
    kernel of ``Op``) the residual is meaningless; the result is flagged as
    a kernel member with ``residual = nan``.
    """
    same_grid(V_target, psi)
    img = applier(psi)
    same_grid(V_target, img)
    ratio = kernel_ratio(img, psi, trim)
    if ratio < kernel_tol:
        return Intertwining(math.nan, True, ratio)
    d2 = _derivative_array(img.values, img.grid.h, 2)
    res = -d2 + (V_target.values - E) * img.values
    r = float(np.max(np.abs(interior(res, trim))) / np.max(np.abs(interior(img.values, trim))))
    return Intertwining(r, False, ratio)


@dataclass(frozen=True)
class SpectrumComparison:
    passed: bool
    matches: tuple  # (expected, found, delta)
    unmatched_expected: tuple
    unmatched_found: tuple

    def to_dict(self) -> dict:
        return {"pass": self.passed, "matches": [list(m) for m in self.matches],
                "unmatched_expected": list(self.unmatched_expected),
                "unmatched_found": list(self.unmatched_found)}


def spectrum_compare(report, expected: Iterable[float], tol: float) -> SpectrumComparison:
    """Greedy in-order matching of found levels against expected ones.

    Both lists are walked in increasing order. A found level below the next
    expected one (by more than ``tol``) is an intruder and fails the
    comparison; so does any expected level left unmatched. Found levels
    above the highest expected level are reported but do not fail, since
    the solver may return more levels than were asked about.
    """
    found = sorted(float(e) for e in (report.energies if isinstance(report, SpectrumReport) else report))
    exp = sorted(float(e) for e in expected)
    i = j = 0
    matches, miss_e, miss_f = [], [], []
    while i < len(exp) and j < len(found):
        e, f = exp[i], found[j]
        if abs(f - e) <= tol:
            matches.append((e, f, f - e))
            i += 1
            j += 1
        elif f < e:
            miss_f.append(f)
            j += 1
        else:
            miss_e.append(e)
            i += 1
    miss_e.extend(exp[i:])
    extra = found[j:]
    ok = not miss_e and not miss_f
    return SpectrumComparison(ok, tuple(matches), tuple(miss_e), tuple(miss_f + extra))


@dataclass(frozen=True)
class SweepPoint:
    f0: float
    norm: float
    status: str
    error: Optional[str] = None


def norm_sweep(f0_values: Iterable[float], builder: Callable) -> list:
    """Raw norm of the missing state ``w/(u1 f)`` for each ``f0``.

    ``builder(f0)`` returns a :class:`~susy_forge.core.TransformResult`.
    A singular ``f0`` is recorded with ``norm = nan`` and its error message
    rather than aborting the sweep.
    """
    out = []
    for f0 in f0_values:
        try:
            res = builder(float(f0))
        except SingularTransformError as exc:
            out.append(SweepPoint(float(f0), math.nan, "singular", str(exc)))
            continue
        psi = res.psi_eps
        out.append(SweepPoint(float(f0), float(psi.meta["raw_norm"]), psi.meta["status"]))
    return out


def _increasing(points) -> float:
    """Smallest ratio between consecutive norms (> 1 means strictly increasing)."""
    norms = [p.norm for p in points]
    if len(norms) < 2 or not all(math.isfinite(n) for n in norms):
        return math.nan
    return min(b / a for a, b in zip(norms, norms[1:]))


# ---------------------------------------------------------------------------
# suites

FREE_DEFAULTS = {"model": "free", "k": 1.0, "f0": -0.25, "grid_n": 40001,
                 "route_f0": [-0.25, -0.5, -1.0],
                 "sweep_f0": [-0.225, -0.175, -0.135, -0.126]}
COULOMB_DEFAULTS = {"model": "coulomb", "l": 0, "f0": -0.1, "grid_n": None,
                    "route_f0": [-0.1, -0.01, -1.0],
                    "sweep_f0": [-0.1, -0.01, -0.001]}
CONVERGENCE_TOL = 1e-4


def suite_defaults(model: str) -> dict:
    if model == "free":
        return dict(FREE_DEFAULTS)
    if model == "coulomb":
        return dict(COULOMB_DEFAULTS)
    raise ConfigError(f"unknown model {model!r}")


def _guarded(name: str, fn, checks: list, grid_meta: dict):
    """Run ``fn`` producing checks; a library error becomes a failed check."""
    try:
        got = fn()
    except (SusyError, FloatingPointError, ValueError) as exc:
        checks.append(Check(name, math.nan, math.nan, False,
                            {"error": f"{type(exc).__name__}: {exc}", "grid": grid_meta}))
        return
    for c in got if isinstance(got, list) else [got]:
        c.meta.setdefault("grid", grid_meta)
        checks.append(c)


def _every_other(grid: Grid) -> Grid:
    """Grid of double spacing sharing every other sample with ``grid``."""
    m = (grid.n_points - 1) // 2
    return Grid(grid.x_min, grid.x_min + 2 * m * grid.h, m + 1, grid.left, grid.right)


def convergence_check(model, f0: float, grid: Grid) -> Check:
    """Compare ``V3`` against the same construction on the grid of double spacing.

    The difference estimates the discretization error; when it exceeds the
    tolerance the grid is too coarse for the other checks to be trusted.
    """
    coarse = _every_other(grid)
    if coarse.n_points < 4 * TRIM:
        raise ConfigError("grid too small for a convergence estimate")
    fine = transform_model(model, f0, grid=grid).v3.values[::2][:coarse.n_points]
    v3c = transform_model(model, f0, grid=coarse).v3.values
    diff = float(np.max(np.abs(interior(fine - v3c))))
    ok = diff < CONVERGENCE_TOL
    return check("discretization", diff, CONVERGENCE_TOL,
                 diagnostic="ok" if ok else "discretization-too-coarse",
                 n_fine=grid.n_points, n_coarse=coarse.n_points)


def _in_range(name: str, value: float, lo: float, hi: float, **meta) -> Check:
    ok = math.isfinite(value) and lo < value < hi
    return Check(name, float(value), float("nan"), bool(ok), {"range": [lo, hi], **meta},
                 relation=f"in ({lo}, {hi})")


def _flag(name: str, ok: bool, **meta) -> Check:
    return Check(name, 1.0 if ok else 0.0, 0.5, bool(ok), meta, relation=">")


class _Lazy:
    """Memoized transform results so independent checks can share one construction."""

    def __init__(self, model, grid):
        self.model, self.grid = model, grid
        self._res = {}
        self._us = {}

    def result(self, f0: float):
        if f0 not in self._res:
            self._res[f0] = transform_model(self.model, f0, grid=self.grid)
        return self._res[f0]

    def second_level(self, f0: float):
        if f0 not in self._us:
            c = self.result(f0).chain
            self._us[f0] = compute_u_second_level(c.u1, c.w, f0, -1.0, c.x0)
        return self._us[f0]

    def b2(self, f0: float):
        c = self.result(f0).chain
        return b2_coefficients(c.V0, c.w, c.epsilon)


def _route_checks(lazy: _Lazy, f0_values) -> list:
    out = []
    for f0 in f0_values:
        res = lazy.result(float(f0))
        d = float(np.max(np.abs(interior(res.v3.values - res.v3_iterative.values))))
        out.append(check(f"route_equivalence[f0={f0!r}]", d, 1e-4, f0=float(f0)))
    return out


def _operator_checks(lazy: _Lazy, f0: float, window: tuple) -> list:
    """Kernel of ``B3+`` and the Wronskian factorization ``W(u1, u2, u3) = u1 f``."""
    res = lazy.result(f0)
    c = res.chain
    b2, us = lazy.b2(f0), lazy.second_level(f0)
    out = []
    for name, u in (("u1", c.u1), ("u2", c.u2), ("u3", c.u3)):
        out.append(check(f"kernel_b3_{name}", kernel_ratio(apply_b3(b2, us, u), u), KERNEL_TOL))
    # u1~ is not in the kernel; measured where it is not exponentially dominant
    img = apply_b3(b2, us, c.u1_tilde)
    x = c.u1.x
    sel = (x >= window[0]) & (x <= window[1])
    ratio = float(np.max(np.abs(img.values[sel])) / np.max(np.abs(c.u1_tilde.values[sel])))
    out.append(check("non_kernel_b3_u1_tilde", ratio, 1e-1, ">", window=list(window)))
    W = wronskian3(c.u1, c.u2, c.u3, c.x0)
    ref = c.u1.values * c.f.values
    out.append(check("wronskian_factorization",
                     float(np.max(np.abs(W.values - ref)) / np.max(np.abs(ref))), 1e-6))
    D = wronskian3_determinant(c.u1, c.u2, c.u3)
    out.append(check("wronskian_determinant", sup_relative(D.values, W.values), 1e-5))
    return out


def _eig(V: GridFn, n: int, bracket=(-10.0, 0.0)) -> SpectrumReport:
    try:
        return eigensolve(V, EigenSolveConfig(n_levels=n, energy_bracket=bracket))
    except EigenSolveError as exc:
        return SpectrumReport((), meta={"error": str(exc), "reason": exc.reason})


def _spectrum_check(name: str, rep: SpectrumReport, expected, tol: float) -> Check:
    cmp = spectrum_compare(rep, expected, tol)
    worst = max((abs(m[2]) for m in cmp.matches), default=math.inf)
    if not cmp.passed:
        worst = math.inf
    meta = {"comparison": cmp.to_dict(), "too_coarse": rep.meta.get("too_coarse", [])}
    if rep.meta.get("too_coarse"):
        meta["diagnostic"] = "discretization-too-coarse"
    return Check(name, worst, tol, bool(cmp.passed), meta, "<=")


def free_suite(config: Optional[dict] = None) -> Report:
    """Default checks on the free particle seeded with ``e^{kx}``."""
    cfg = {**FREE_DEFAULTS, **(config or {})}
    pack = free_particle_pack(cfg["k"])
    model = pack.model()
    grid = pack.default_grid() if cfg.get("grid_n") is None else pack.default_grid(int(cfg["grid_n"]))
    lazy = _Lazy(model, grid)
    gm = grid.describe()
    k, f0 = pack.k, float(cfg["f0"])
    checks: list = []
    t0 = time.perf_counter()

    def poschl_teller():
        res = lazy.result(f0)
        ref = pack.v3_closed(grid.x, pack.x1_of_f0(f0))
        return check("poschl_teller", float(np.max(np.abs(interior(res.v3.values - ref)))), 1e-5,
                     x1=pack.x1_of_f0(f0))

    def sigma():
        return check("sigma_minus", abs(lazy.result(f0).sigma_minus - pack.sigma_minus), 1e-8,
                     sigma_minus=lazy.result(f0).sigma_minus)

    def window():
        probe = -pack.sigma_minus + 0.04 * pack.sigma_minus
        try:
            lazy.result(probe)
        except SingularTransformError as exc:
            return _flag("forbidden_window", math.isfinite(exc.location), f0=probe,
                         node=_json_float(exc.location))
        return _flag("forbidden_window", False, f0=probe)

    def level():
        rep = _eig(lazy.result(f0).v3, 2)
        return _spectrum_check("level_creation", rep, [-k * k], 1e-4)

    def sweep():
        pts = norm_sweep(cfg["sweep_f0"], lazy.result)
        return check("missing_state_norm_increasing", _increasing(pts), 1.0, ">",
                     norms=[_json_float(p.norm) for p in pts], f0=list(cfg["sweep_f0"]))

    _guarded("poschl_teller", poschl_teller, checks, gm)
    _guarded("sigma_minus", sigma, checks, gm)
    _guarded("forbidden_window", window, checks, gm)
    _guarded("route_equivalence", lambda: _route_checks(lazy, cfg["route_f0"]), checks, gm)
    _guarded("operator_algebra", lambda: _operator_checks(lazy, f0, (-2.0 / k, 2.0 / k)), checks, gm)
    _guarded("level_creation", level, checks, gm)
    _guarded("missing_state_norm_increasing", sweep, checks, gm)
    _guarded("discretization", lambda: convergence_check(model, f0, grid), checks, gm)
    log.info("free suite: %d checks in %.2f s", len(checks), time.perf_counter() - t0)
    return Report(checks, cfg)


def coulomb_suite(config: Optional[dict] = None) -> Report:
    """Default checks on the radial Coulomb problem seeded with its ground state."""
    cfg = {**COULOMB_DEFAULTS, **(config or {})}
    pack = coulomb_pack(cfg["l"])
    model = pack.model()
    grid = pack.default_grid(None if cfg.get("grid_n") is None else int(cfg["grid_n"]))
    lazy = _Lazy(model, grid)
    gm = grid.describe()
    f0 = float(cfg["f0"])
    r = grid.x
    E = [pack.E(n) for n in range(3)]
    checks: list = []

    def w_closed():
        c = lazy.result(f0).chain
        sel = r <= 30.0
        return check("w_closed_form", float(np.max(np.abs(c.w.values[sel] - pack.w(r[sel])))), 1e-7)

    def f_forms():
        c = lazy.result(f0).chain
        idx = sorted({grid.index_of(x) for x in (0.5, 1.0, 2.0, 5.0)})
        rs = r[idx]
        hyp = pack.f(rs, f0, "hyp-plus-tail")
        dbl = pack.f(rs, f0, "double-sum")
        return [check("f_representations", float(np.max(np.abs(hyp - dbl))), 1e-9, r=rs.tolist()),
                check("f_quadrature", float(np.max(np.abs(hyp - c.f.values[idx]))), 1e-7, r=rs.tolist())]

    def well():
        res = lazy.result(f0)
        v3, v0 = res.v3.values, res.chain.V0.values
        m = local_minimum(r[TRIM:-TRIM], v3[TRIM:-TRIM])
        well = math.nan if m is None else m[0]
        tail = abs(float(v3[-TRIM - 1] - v0[-TRIM - 1]))
        return [_in_range("well_location", well, 0.3, 2.5, depth=_json_float(m[1]) if m else "nan"),
                check("well_tail", tail, 1e-3, r=float(r[-TRIM - 1]))]

    def isospectral():
        res = lazy.result(f0)
        return [_spectrum_check("isospectral_v0", _eig(res.chain.V0, 3), E, 1e-3),
                _spectrum_check("isospectral_v3", _eig(res.v3, 3), E, 1e-3)]

    def deletion():
        res = lazy.result(0.0)
        rep = _eig(res.v3, 3)
        without = _spectrum_check("deletion_spectrum", rep, E[1:], 1e-3)
        with_ground = spectrum_compare(rep, E[:2], 1e-3)
        return [_flag("deletion_regime", res.regime is Regime.GROUND_DELETED, regime=res.regime.value),
                without,
                _flag("deletion_ground_absent", not with_ground.passed,
                      comparison=with_ground.to_dict())]

    def sweep():
        pts = norm_sweep(cfg["sweep_f0"], lazy.result)
        return check("missing_state_norm_growth", _increasing(pts), 2.0, ">",
                     norms=[_json_float(p.norm) for p in pts], f0=list(cfg["sweep_f0"]))

    def intertwining():
        res = lazy.result(f0)
        c = res.chain
        b2, us = lazy.b2(f0), lazy.second_level(f0)
        psi1 = c.V0.with_values(pack.eigenstate(1, r), "psi_1")
        psi2 = c.V0.with_values(pack.eigenstate(2, r), "psi_2")
        i3 = intertwining_residual(res.v3, lambda p: apply_b3(b2, us, p, energy=E[1]), psi1, E[1])
        i2 = intertwining_residual(res.v2, lambda p: apply_b2(b2, p, energy=E[2]), psi2, E[2])
        raw3 = map_eigenstate_3(b2, us, psi1, E[1]).meta["raw_norm"]
        raw2 = map_eigenstate_2(b2, psi1, E[1]).meta["raw_norm"]
        return [check("intertwining_b3_psi1", i3.residual, 1e-3),
                check("intertwining_b2_psi2", i2.residual, 1e-4),
                check("mapped_norm_b3_psi1", abs(raw3 - 1.0), 5e-2, raw_norm=raw3),
                check("mapped_norm_b2_psi1", abs(raw2 - 1.0), 5e-2, raw_norm=raw2)]

    _guarded("w_closed_form", w_closed, checks, gm)
    _guarded("f_closed_forms", f_forms, checks, gm)
    _guarded("well_profile", well, checks, gm)
    _guarded("isospectral", isospectral, checks, gm)
    _guarded("deletion", deletion, checks, gm)
    _guarded("missing_state_norm_growth", sweep, checks, gm)
    _guarded("route_equivalence", lambda: _route_checks(lazy, cfg["route_f0"]), checks, gm)
    _guarded("operator_algebra", lambda: _operator_checks(lazy, f0, (0.5, 3.0)), checks, gm)
    _guarded("intertwining", intertwining, checks, gm)
    _guarded("discretization", lambda: convergence_check(model, f0, grid), checks, gm)
    return Report(checks, cfg)


def run_suite(config: dict) -> Report:
    model = config.get("model", "free")
    if model == "free":
        return free_suite(config)
    if model == "coulomb":
        return coulomb_suite(config)
    raise ConfigError(f"unknown model {model!r}")


def diagnostics(report: Report) -> list:
    """Distinct non-ok diagnostics attached to failed checks."""
    tags = {c.meta.get("diagnostic") for c in report.checks if not c.passed}
    tags.discard(None)
    tags.discard("ok")
    return sorted(tags)
