"""
Closed-form model packs: the free particle and the radial Coulomb problem.

Each pack exposes the analytic seed, ``w``, ``f`` and ``V3`` where closed
forms exist, and a :class:`~susy_forge.core.Model` for the generic pipeline.
The closed forms serve as oracles for the numerical construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .core import (
    ConfigError, Grid, Model, SeedKind, make_grid, truncated_infinite, truncated_singular,
)
from .numerics import _derivative_array
from .specfun import coulomb_f, log_lower_incomplete_gamma_int

MAX_L = 8


# ---------------------------------------------------------------------------
# free particle

@dataclass(frozen=True)
class FreeParticlePack:
    """``V0 = 0`` with the seed ``u1 = e^{kx}`` at ``eps = -k**2``."""

    k: float = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError("free particle needs k > 0")

    @property
    def epsilon(self) -> float:
        return -self.k ** 2

    @property
    def sigma_minus(self) -> float:
        return 1.0 / (8 * self.k ** 3)

    def u1(self, x):
        return np.exp(self.k * np.asarray(x, dtype=float))

    def w(self, x):
        return -np.exp(2 * self.k * np.asarray(x, dtype=float)) / (2 * self.k)

    def f(self, x, f0: float):
        x = np.asarray(x, dtype=float)
        return f0 + (1 - np.exp(2 * self.k * x)) / (8 * self.k ** 3)

    def x1_of_f0(self, f0: float) -> float:
        """Centre ``x1`` of the well, from ``f0 = -(1 + e^{2 k x1}) / (8 k^3)``."""
        arg = -8 * self.k ** 3 * f0 - 1
        if not arg > 0:
            raise ConfigError(f"f0 = {f0} is outside the window f0 < {-self.sigma_minus}")
        return math.log(arg) / (2 * self.k)

    def f0_of_x1(self, x1: float) -> float:
        return -(1 + math.exp(2 * self.k * x1)) / (8 * self.k ** 3)

    def v3_closed(self, x, x1: float = 0.0):
        """Poeschl-Teller well ``-2 k^2 sech^2(k (x - x1))``."""
        x = np.asarray(x, dtype=float)
        return -2 * self.k ** 2 / np.cosh(self.k * (x - x1)) ** 2

    def psi_eps_closed(self, x, x1: float = 0.0):
        """Normalized bound state ``sqrt(k/2) sech(k (x - x1))`` of the well."""
        x = np.asarray(x, dtype=float)
        return math.sqrt(self.k / 2) / np.cosh(self.k * (x - x1))

    def default_grid(self, n: int = 40001) -> Grid:
        L = 20.0 / self.k
        return make_grid(-L, L, n, truncated_infinite(-1), truncated_infinite(1))

    def model(self) -> Model:
        k = self.k
        return Model(
            name="free",
            potential=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            domain=(-math.inf, math.inf),
            epsilon=-k * k,
            seed=self.u1,
            seed_derivative=lambda x: k * np.exp(k * np.asarray(x, dtype=float)),
            seed_kind=SeedKind.NONPHYSICAL,
            E0=math.inf,
            params={"k": k, "x0": 0.0},
            default_grid=self.default_grid,
        )


def free_particle_pack(k: float = 1.0) -> FreeParticlePack:
    return FreeParticlePack(float(k))


# ---------------------------------------------------------------------------
# Coulomb

@dataclass(frozen=True)
class CoulombPack:
    """``V0 = -2/r + l(l+1)/r^2`` seeded with its normalized ground state."""

    l: int = 0
    delta: float = 1e-3

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise ConfigError("angular momentum l must be a non-negative integer")
        if self.l > MAX_L:
            raise ConfigError(f"l > {MAX_L} is not supported (factorials lose precision)")

    @property
    def epsilon(self) -> float:
        return self.E(0)

    @property
    def sigma_minus(self) -> float:
        return 0.0

    def V0(self, r):
        r = np.asarray(r, dtype=float)
        return -2.0 / r + self.l * (self.l + 1) / r ** 2

    def E(self, n: int) -> float:
        if n < 0:
            raise ConfigError("level index must be >= 0")
        return -1.0 / (n + self.l + 1) ** 2

    def _log_norm(self) -> float:
        l = self.l
        return -math.log(l + 1) - 0.5 * math.lgamma(2 * l + 2)

    def u1(self, r):
        r = np.asarray(r, dtype=float)
        l = self.l
        s = 2 * r / (l + 1)
        return np.exp(self._log_norm()) * s ** (l + 1) * np.exp(-r / (l + 1))

    def u1_derivative(self, r):
        r = np.asarray(r, dtype=float)
        l = self.l
        return self.u1(r) * ((l + 1) / r - 1.0 / (l + 1))

    def eigenstate(self, n: int, r):
        """Normalized radial function ``r R_{N l}(r)``, ``N = n + l + 1``."""
        r = np.asarray(r, dtype=float)
        l = self.l
        N = n + l + 1
        lognorm = 0.5 * (3 * math.log(2.0 / N) + gammaln(N - l) - math.log(2 * N) - gammaln(N + l + 1))
        rho = 2 * r / N
        return r * np.exp(lognorm - r / N) * rho ** l * eval_genlaguerre(N - l - 1, 2 * l + 1, rho)

    def w(self, r):
        """``w = -gamma(2l+3, 2r/(l+1)) / (2l+2)!``."""
        r = np.asarray(r, dtype=float)
        a = 2 * self.l + 3
        s = 2 * r / (self.l + 1)
        return -np.exp(log_lower_incomplete_gamma_int(a, s) - math.lgamma(a))

    def w_over_u1(self, r):
        """``w/u1`` from the closed forms; the removable limit at ``r = 0`` is 0."""
        r = np.asarray(r, dtype=float)
        l = self.l
        a = 2 * l + 3
        s = 2 * r / (l + 1)
        pos = r > 0
        out = np.zeros_like(r)
        sp = s[pos]
        logu = self._log_norm() + (l + 1) * np.log(sp) - r[pos] / (l + 1)
        out[pos] = -np.exp(log_lower_incomplete_gamma_int(a, sp) - math.lgamma(a) - logu)
        return out

    def w_over_u1_series(self, r, terms: int = 60):
        """Truncated power series ``-(l+1) sqrt((2l+1)!) e^{-r/(l+1)} sum_k s^(k-l-1)/k!``."""
        r = np.asarray(r, dtype=float)
        l = self.l
        s = 2 * r / (l + 1)
        total = np.zeros_like(r)
        for k in range(2 * l + 3, 2 * l + 3 + terms):
            total += np.exp((k - l - 1) * np.log(np.where(s > 0, s, 1.0)) - math.lgamma(k + 1)) * (s > 0)
        return -(l + 1) * math.sqrt(math.factorial(2 * l + 1)) * np.exp(-r / (l + 1)) * total

    def _check_f0(self, f0: float):
        if f0 > 0:
            raise ConfigError(f"f0 = {f0} > 0 is in the forbidden window (f nodeless only for f0 <= 0)")

    def f(self, r, f0: float, representation: str = "hyp-plus-tail"):
        self._check_f0(f0)
        return coulomb_f(self.l, f0, r, representation)

    def v3(self, grid: Grid, f0: float):
        """``-2/r + (l+1)(l+2)/r^2 + 2 [w^2/(f u1^2)]'`` with the bracket differenced to fourth order."""
        self._check_f0(f0)
        r = grid.x
        q = self.w_over_u1(r)
        bracket = q * q / self.f(r, f0)
        d = _derivative_array(bracket, grid.h, 1)
        l = self.l
        return -2.0 / r + (l + 1) * (l + 2) / r ** 2 + 2.0 * d

    def default_grid(self, n: Optional[int] = None) -> Grid:
        """``(delta, 60 (l+1)]``; by default the spacing equals ``delta`` so samples sit on multiples of it."""
        r_max = 60.0 * (self.l + 1)
        if n is None:
            n = int(round(r_max / self.delta))
        return make_grid(0.0, r_max, n, truncated_singular(0.0, self.delta), truncated_infinite(1))

    def model(self) -> Model:
        return Model(
            name="coulomb",
            potential=self.V0,
            domain=(0.0, math.inf),
            epsilon=self.epsilon,
            seed=self.u1,
            seed_derivative=self.u1_derivative,
            eigenvalues=self.E,
            eigenstates=self.eigenstate,
            seed_kind=SeedKind.GROUND_STATE,
            E0=self.E(0),
            params={"l": self.l, "x0": 0.0, "delta": self.delta},
            default_grid=self.default_grid,
        )


def coulomb_pack(l: int = 0, delta: float = 1e-3) -> CoulombPack:
    return CoulombPack(int(l), float(delta))


@dataclass(frozen=True)
class WellProfile:
    r: np.ndarray
    v0: np.ndarray
    v3: np.ndarray
    well_r: float
    well_depth: float
    f0: float


def local_minimum(x: np.ndarray, y: np.ndarray, lo: float = -math.inf, hi: float = math.inf):
    """First interior local minimum of ``y`` with ``lo < x < hi``, as ``(x*, y*)`` or None."""
    inner = (y[1:-1] < y[:-2]) & (y[1:-1] <= y[2:]) & (x[1:-1] > lo) & (x[1:-1] < hi)
    idx = np.nonzero(inner)[0]
    if len(idx) == 0:
        return None
    i = idx[0] + 1
    return float(x[i]), float(y[i])


def coulomb_well_profile(f0: float = -0.1, l: int = 0, r_max: float = 60.0, n: int = 60000,
                    delta: float = 1e-3) -> WellProfile:
    """``V0`` and the closed-form ``V3`` on ``(delta, r_max]``, with the induced well located."""
    if not f0 < 0:
        raise ConfigError(f"f0 = {f0} must lie in the window f0 < 0")
    pack = coulomb_pack(l, delta)
    grid = make_grid(0.0, r_max, n, truncated_singular(0.0, delta), truncated_infinite(1))
    r = grid.x
    v0 = pack.V0(r)
    v3 = pack.v3(grid, f0)
    # skip the centrifugal wall near the origin
    m = local_minimum(r[5:-5], v3[5:-5])
    well_r, depth = (math.nan, math.nan) if m is None else m
    return WellProfile(r, v0, v3, well_r, depth, float(f0))
