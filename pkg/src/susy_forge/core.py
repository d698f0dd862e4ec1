"""
Domain types shared across the package.

Everything here is a plain, immutable container: grids, functions sampled on
grids, declarative base models and the results produced by the
transformation pipeline. No numerical algorithms live in this module beyond
construction-time validation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np


class SusyError(Exception):
    """Base class for all errors raised by the package."""


class ConfigError(SusyError, ValueError):
    """Invalid user input: degenerate domain, bad parameter, mismatched grids."""


class NodeError(SusyError):
    """A function required to be nodeless changes sign (or vanishes) in the interior.

    Attributes
    ----------
    location : float
        Grid abscissa of the first detected node.
    what : str
        Label of the offending function.
    """

    def __init__(self, location: float, what: str = "function"):
        self.location = float(location)
        self.what = what
        super().__init__(f"node detected in {what} at x = {self.location:.12g}")


class SingularTransformError(NodeError):
    """The requested transformation produces a potential with additional singularities."""


class DivergentIntegralError(SusyError):
    """An endpoint integral (nu or sigma) does not converge at a truncated endpoint."""


class ConvergenceError(SusyError):
    """A series or iterative procedure hit its term/iteration cap."""


class EigenSolveError(SusyError):
    """The eigensolver found no level in the bracket.

    ``reason`` is ``"no-eigenvalue"`` for a valid bracket that holds no bound
    state, or ``"continuum"`` when the bracket lies above the continuum
    threshold.
    """

    def __init__(self, message: str, reason: str = "no-eigenvalue"):
        self.reason = reason
        super().__init__(message)


class BoundaryKind(str, enum.Enum):
    FINITE = "finite"
    TRUNCATED_INFINITE = "truncated-infinite"
    TRUNCATED_SINGULAR = "truncated-singular"


@dataclass(frozen=True)
class Boundary:
    """One end of a grid: what kind of endpoint it is and where it nominally sits.

    For a truncated-singular end ``offset`` is the distance between the
    nominal singular point and the first sample.
    """

    kind: BoundaryKind = BoundaryKind.FINITE
    nominal: float = math.nan
    offset: float = 0.0

    @property
    def truncated(self) -> bool:
        return self.kind is not BoundaryKind.FINITE


FINITE = Boundary()


def truncated_infinite(sign: int) -> Boundary:
    return Boundary(BoundaryKind.TRUNCATED_INFINITE, math.copysign(math.inf, sign))


def truncated_singular(nominal: float, offset: float = 1e-3) -> Boundary:
    if not offset > 0:
        raise ConfigError("a truncated-singular endpoint needs an offset > 0")
    return Boundary(BoundaryKind.TRUNCATED_SINGULAR, float(nominal), float(offset))


@dataclass(frozen=True)
class Grid:
    """Uniform sample grid ``x_min = x_0 < x_1 < ... < x_{n-1} = x_max``.

    ``x_min``/``x_max`` are the actual first and last samples; the nominal
    problem endpoints are carried by ``left``/``right``.
    """

    x_min: float
    x_max: float
    n_points: int
    left: Boundary = FINITE
    right: Boundary = FINITE

    def __post_init__(self):
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)):
            raise ConfigError("grid bounds must be finite")
        if not self.x_min < self.x_max:
            raise ConfigError(f"degenerate domain: x_min={self.x_min} >= x_max={self.x_max}")
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ConfigError("a grid needs at least 3 points")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        # linspace pins both endpoints exactly; spacing is uniform to rounding
        x = np.linspace(self.x_min, self.x_max, self.n_points)
        x.flags.writeable = False
        return x

    def index_of(self, x0: float) -> int:
        """Index of the sample nearest to ``x0`` (clamped to the grid)."""
        i = int(round((x0 - self.x_min) / self.h))
        return min(max(i, 0), self.n_points - 1)

    def reflected(self) -> "Grid":
        """The grid under ``x -> -x``; left and right ends swap."""

        def flip(b: Boundary) -> Boundary:
            return Boundary(b.kind, -b.nominal, b.offset)

        return Grid(-self.x_max, -self.x_min, self.n_points, flip(self.right), flip(self.left))

    def describe(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "n_points": self.n_points,
            "h": self.h,
            "left": {"kind": self.left.kind.value, "nominal": self.left.nominal},
            "right": {"kind": self.right.kind.value, "nominal": self.right.nominal},
        }


def make_grid(x_min: float, x_max: float, n: int,
              left: Boundary = FINITE, right: Boundary = FINITE) -> Grid:
    """Build a uniform grid between nominal bounds.

    A truncated-singular end is pulled inwards by its offset, so
    ``make_grid(0, 60, 60001, truncated_singular(0, 1e-3))`` starts at
    ``r = 1e-3``.
    """
    if not (math.isfinite(x_min) and math.isfinite(x_max)):
        raise ConfigError("grid bounds must be finite")
    lo = x_min + left.offset if left.kind is BoundaryKind.TRUNCATED_SINGULAR else x_min
    hi = x_max - right.offset if right.kind is BoundaryKind.TRUNCATED_SINGULAR else x_max
    if left.kind is BoundaryKind.TRUNCATED_SINGULAR and math.isnan(left.nominal):
        left = Boundary(left.kind, x_min, left.offset)
    if right.kind is BoundaryKind.TRUNCATED_SINGULAR and math.isnan(right.nominal):
        right = Boundary(right.kind, x_max, right.offset)
    return Grid(float(lo), float(hi), int(n), left, right)


@dataclass(frozen=True, eq=False)
class GridFn:
    """Real function tabulated on a grid.

    ``deriv`` and ``deriv2`` optionally hold exact first and second
    derivatives when the construction that produced the function knows them
    (e.g. ``w' = -u1**2``, ``u1'' = (V0 - eps) u1``).
    """

    grid: Grid
    values: np.ndarray
    label: str = ""
    deriv: Optional[np.ndarray] = None
    deriv2: Optional[np.ndarray] = None
    allows_endpoint_blowup: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ConfigError(
                f"{self.label or 'GridFn'}: {v.shape} values for a {self.grid.n_points}-point grid")
        bad = ~np.isfinite(v)
        if bad.any():
            allowed = np.zeros_like(bad)
            if self.allows_endpoint_blowup:
                allowed[:2] = self.grid.left.truncated
                allowed[-2:] = self.grid.right.truncated
            if (bad & ~allowed).any():
                raise ConfigError(f"{self.label or 'GridFn'} has non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        for name in ("deriv", "deriv2"):
            d = getattr(self, name)
            if d is None:
                continue
            d = np.array(d, dtype=float)
            if d.shape != v.shape:
                raise ConfigError("derivative shape does not match values")
            d.flags.writeable = False
            object.__setattr__(self, name, d)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return self.grid.n_points

    def __call__(self, x0: float) -> float:
        """Value at the sample nearest to ``x0``."""
        return float(self.values[self.grid.index_of(x0)])

    def with_values(self, values, label=None, deriv=None, deriv2=None, **meta) -> "GridFn":
        return GridFn(self.grid, values, label if label is not None else self.label,
                      deriv=deriv, deriv2=deriv2, meta={**self.meta, **meta})

    def scaled(self, c: float) -> "GridFn":
        d = None if self.deriv is None else c * self.deriv
        d2 = None if self.deriv2 is None else c * self.deriv2
        return GridFn(self.grid, c * self.values, self.label, deriv=d, deriv2=d2, meta=dict(self.meta))

    def reflected(self) -> "GridFn":
        """The function ``x -> g(-x)`` on the reflected grid."""
        d = None if self.deriv is None else -self.deriv[::-1]
        d2 = None if self.deriv2 is None else self.deriv2[::-1]
        return GridFn(self.grid.reflected(), self.values[::-1], self.label, deriv=d, deriv2=d2,
                      allows_endpoint_blowup=self.allows_endpoint_blowup, meta=dict(self.meta))


def same_grid(*fns: GridFn) -> Grid:
    g = fns[0].grid
    for fn in fns[1:]:
        if fn.grid != g:
            raise ConfigError(f"grid mismatch between {fns[0].label!r} and {fn.label!r}")
    return g


class SeedKind(str, enum.Enum):
    NONPHYSICAL = "nonphysical"
    GROUND_STATE = "ground-state"


@dataclass(frozen=True)
class Model:
    """Declarative base problem ``H0 = -d^2/dx^2 + V0`` on ``(x_l, x_r)``.

    ``potential``, ``seed`` and ``seed_derivative`` map an array of abscissae
    to values. ``eigenvalues`` maps ``n`` to ``E_n`` and ``eigenstates`` maps
    ``(n, x)`` to the normalized bound state. ``E0 = inf`` stands for a base
    Hamiltonian without discrete spectrum.
    """

    name: str
    potential: Callable[[np.ndarray], np.ndarray]
    domain: tuple[float, float]
    epsilon: float
    seed: Optional[Callable[[np.ndarray], np.ndarray]] = None
    seed_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eigenvalues: Optional[Callable[[int], float]] = None
    eigenstates: Optional[Callable[[int, np.ndarray], np.ndarray]] = None
    seed_kind: SeedKind = SeedKind.NONPHYSICAL
    E0: float = math.inf
    params: dict = field(default_factory=dict)
    default_grid: Optional[Callable[[], Grid]] = None

    def __post_init__(self):
        if self.potential is None:
            raise ConfigError("a model needs a potential rule")
        lo, hi = self.domain
        if not lo < hi:
            raise ConfigError("model domain must satisfy x_l < x_r")


def tabulate(model: Model, grid: Grid) -> GridFn:
    """Sample the model potential on ``grid``.

    Raises if a sample sits exactly on a nominal singular point (e.g. ``r = 0``
    for Coulomb) or outside the model domain.
    """
    lo, hi = model.domain
    if grid.x_min < lo or grid.x_max > hi:
        raise ConfigError(f"grid [{grid.x_min}, {grid.x_max}] leaves the model domain {model.domain}")
    x = grid.x
    for b in (grid.left, grid.right):
        if b.kind is BoundaryKind.TRUNCATED_SINGULAR and np.any(x == b.nominal):
            raise ConfigError(f"potential evaluated at the singular point {b.nominal}")
    with np.errstate(divide="raise", invalid="raise"):
        try:
            v = np.asarray(model.potential(x), dtype=float) * np.ones_like(x)
        except FloatingPointError as exc:
            raise ConfigError(f"potential not finite on the grid: {exc}") from None
    return GridFn(grid, v, "V0")


class Regime(str, enum.Enum):
    AUGMENTED = "augmented"
    ISOSPECTRAL = "isospectral"
    GROUND_DELETED = "ground-deleted"
    SINGULAR = "singular"


class Anchoring(str, enum.Enum):
    LEFT = "left-anchored"
    RIGHT = "right-anchored"
    EXPLICIT = "explicit-w0"


@dataclass(frozen=True, eq=False)
class JordanChain:
    """Generalized eigenfunctions ``u1, u2, u3`` at ``epsilon`` plus the derived ``w`` and ``f``.

    ``x0`` is the common base point of every cumulative integral; ``w0`` is
    ``w(x0)``; ``w1`` is ``W(u1, u3)`` at ``x0``. ``f0 = w1 - w0 * beta1``.
    """

    epsilon: float
    V0: GridFn
    u1: GridFn
    u1_tilde: GridFn
    u2: Optional[GridFn]
    u3: Optional[GridFn]
    w: GridFn
    f: Optional[GridFn]
    beta1: float
    f0: float
    x0: float
    w0: float
    w1: float
    anchoring: Anchoring


@dataclass(frozen=True, eq=False)
class TransformResult:
    v3: GridFn
    sigma_minus: float
    f0_used: float
    regime: Regime
    chain: JordanChain
    v2: Optional[GridFn] = None
    v3_iterative: Optional[GridFn] = None
    psi_eps: Optional[GridFn] = None
    singular_reason: Optional[str] = None
    node_at: Optional[float] = None

    @property
    def f0_window(self) -> tuple[float, float]:
        """Admissible ``f0`` values: the open interval ``(-inf, -sigma_minus)``."""
        return (-math.inf, -self.sigma_minus)


@dataclass(frozen=True)
class Level:
    index: int
    E: float
    residual: float


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple[Level, ...]
    classification: Optional[Regime] = None
    comparison: Optional[tuple[tuple[float, float, float], ...]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        es = [lv.E for lv in self.eigenvalues]
        if any(b <= a for a, b in zip(es, es[1:])):
            raise ConfigError("eigenvalues must be strictly increasing")
        if any(lv.residual < 0 for lv in self.eigenvalues):
            raise ConfigError("residual norms are non-negative")

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.E for lv in self.eigenvalues])

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [{"index": lv.index, "E": lv.E, "residual": lv.residual}
                            for lv in self.eigenvalues],
            "classification": None if self.classification is None else self.classification.value,
            "comparison": None if self.comparison is None else [
                {"expected": a, "found": b, "delta": c} for a, b, c in self.comparison],
            "meta": self.meta,
        }
