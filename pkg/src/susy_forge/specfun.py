"""
Special functions for the Coulomb model.

Lower incomplete gamma at integer order, the generalized hypergeometric 2F2
by its power series, and the two series representations of the Coulomb
``f(r)``. Functions accept scalars or numpy arrays for the real argument.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ConfigError, ConvergenceError

REL_TOL = 1e-12
TERM_CAP = 100_000
CLAMP_X = 700.0


def _check_order(a) -> int:
    if int(a) != a or a < 1:
        raise ConfigError(f"incomplete gamma order must be a positive integer, got {a}")
    return int(a)


def _gamma_scalar(a: int, x: float) -> float:
    if x == 0.0:
        return 0.0
    if x > CLAMP_X and a < x / 2:
        return math.factorial(a - 1)
    if x >= a:
        # (a-1)! (1 - e^-x sum_{j<a} x^j / j!); the subtracted sum is <= ~1/2 here
        q = math.fsum(math.exp(j * math.log(x) - x - math.lgamma(j + 1)) for j in range(a))
        return math.exp(math.lgamma(a)) * (1.0 - q)
    return math.exp(_log_tail(a, x))


def _log_tail(a: int, x: float) -> float:
    """log of ``x^a e^-x / a * sum_i prod_{t<=i} x / (a + t)``, valid for ``x < a``."""
    terms = [1.0]
    t = 1.0
    i = 0
    while True:
        i += 1
        t *= x / (a + i)
        terms.append(t)
        if t < 1e-17 * terms[0]:
            break
        if i > TERM_CAP:
            raise ConvergenceError("incomplete gamma tail series did not converge")
    return a * math.log(x) - x - math.log(a) + math.log(math.fsum(terms))


def lower_incomplete_gamma_int(a: int, x):
    """Lower incomplete gamma ``gamma(a, x) = int_0^x t^(a-1) e^-t dt`` for integer ``a >= 1``.

    For ``x >= a`` the finite identity ``(a-1)! (1 - e^-x sum_{k<a} x^k/k!)``
    is used with compensated summation; below that the equivalent tail
    ``(a-1)! e^-x sum_{k>=a} x^k/k!`` avoids cancellation. Far beyond the
    order (``x > 700``) the value is clamped to ``(a-1)!``.
    """
    a = _check_order(a)
    if np.ndim(x) == 0:
        x = float(x)
        if x < 0:
            raise ConfigError("incomplete gamma argument must be >= 0")
        return _gamma_scalar(a, x)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ConfigError("incomplete gamma argument must be >= 0")
    return np.exp(log_lower_incomplete_gamma_int(a, x))


def log_lower_incomplete_gamma_int(a: int, x):
    """``log gamma(a, x)``; ``-inf`` at ``x = 0``. Safe when ``gamma(a, x)`` itself overflows."""
    a = _check_order(a)
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    pos = x > 0
    big = pos & (x >= a)
    small = pos & (x < a)
    if big.any():
        xb = x[big]
        lx = np.log(xb)
        q = np.zeros_like(xb)
        for j in range(a):
            q += np.exp(j * lx - xb - math.lgamma(j + 1))
        out[big] = math.lgamma(a) + np.log1p(-np.minimum(q, 1.0))
    if small.any():
        xs = x[small]
        s = np.ones_like(xs)
        t = np.ones_like(xs)
        i = 0
        while True:
            i += 1
            t = t * xs / (a + i)
            s += t
            if np.all(t < 1e-17 * s):
                break
            if i > TERM_CAP:
                raise ConvergenceError("incomplete gamma tail series did not converge")
        out[small] = a * np.log(xs) - xs - math.log(a) + np.log(s)
    return out[()] if out.ndim == 0 else out


def _is_pole(b) -> bool:
    return b <= 0 and float(b).is_integer()


def hyp2f2(a1: float, a2: float, b1: float, b2: float, z, rel_tol: float = REL_TOL,
           cap: int = TERM_CAP):
    """Generalized hypergeometric ``2F2(a1, a2; b1, b2; z)`` by its power series.

    Terms follow the Pochhammer recurrence; summation stops once three
    consecutive terms fall below ``rel_tol`` times the partial sum.
    """
    if _is_pole(b1) or _is_pole(b2):
        raise ConfigError(f"2F2 denominator parameter is a non-positive integer ({b1}, {b2})")
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    total = np.ones_like(z)
    term = np.ones_like(z)
    small_run = np.zeros(z.shape, dtype=int)
    n = 0
    while True:
        term = term * (a1 + n) * (a2 + n) / ((b1 + n) * (b2 + n)) * z / (n + 1)
        n += 1
        total = total + term
        small = np.abs(term) < rel_tol * np.abs(total)
        small_run = np.where(small, small_run + 1, 0)
        if np.all(small_run >= 3):
            break
        if n >= cap:
            raise ConvergenceError(f"2F2 series did not converge in {cap} terms")
    return float(total[0]) if scalar else total


def _consecutive_small_sum(terms, rel_tol: float, cap: int, what: str) -> float:
    """Sum a lazily generated positive series with the 3-consecutive-small stop."""
    parts = []
    partial = 0.0
    run = 0
    for i, t in enumerate(terms):
        parts.append(t)
        partial += t
        run = run + 1 if t < rel_tol * abs(partial) else 0
        if run >= 3:
            break
        if i >= cap:
            raise ConvergenceError(f"{what} did not converge in {cap} terms")
    return math.fsum(parts)


def _f_double_sum(l: int, s: float, rel_tol: float) -> float:
    a = 2 * l + 3
    cache: dict[int, float] = {}

    def lg(n):
        if n not in cache:
            cache[n] = float(log_lower_incomplete_gamma_int(n, s))
        return cache[n]

    def inner(k):
        lk = math.lgamma(k + 1)
        return (math.exp(lg(k + m - 2 * l - 1) - lk - math.lgamma(m + 1))
                for m in range(a, a + TERM_CAP + 1))

    outer = (_consecutive_small_sum(inner(k), rel_tol, TERM_CAP, "coulomb_f inner sum")
             for k in range(a, a + TERM_CAP + 1))
    return _consecutive_small_sum(outer, rel_tol, TERM_CAP, "coulomb_f outer sum")


def _f_tail_series(l: int, s: np.ndarray, rel_tol: float) -> np.ndarray:
    """``sum_m gamma(m + 2l + 5, s) / ((m + 2) (m + 2l + 3)!)`` vectorized over ``s``.

    Uses ``gamma(c + m, s) / (c + m - 2)! = (c + m - 1) P(c + m, s)`` with the
    regularized ``P`` stepped down by Poisson weights.
    """
    c = 2 * l + 5
    P = np.exp(log_lower_incomplete_gamma_int(c, s) - math.lgamma(c))
    ls = np.log(np.where(s > 0, s, 1.0))
    total = np.zeros_like(s)
    run = np.zeros(s.shape, dtype=int)
    m = 0
    while True:
        term = (c + m - 1) * P / (m + 2)
        total = total + term
        small = term <= rel_tol * np.abs(total)
        run = np.where(small, run + 1, 0)
        if np.all(run >= 3):
            break
        a = c + m
        pois = np.where(s > 0, np.exp(a * ls - s - math.lgamma(a + 1)), 0.0)
        P = np.maximum(P - pois, 0.0)
        m += 1
        if m >= TERM_CAP:
            raise ConvergenceError("coulomb_f tail series did not converge")
    return total


def coulomb_f(l: int, f0: float, r, representation: str = "hyp-plus-tail",
              rel_tol: float = REL_TOL):
    """Coulomb ``f(r) = f0 - int_0^r (w/u1)^2`` in closed series form.

    ``representation='double-sum'`` sums
    ``(l+1)^3 (2l+1)!/2 * sum_{k,m >= 2l+3} gamma(k+m-2l-1, s) / (k! m!)``
    with ``s = 2r/(l+1)``; ``'hyp-plus-tail'`` uses the 2F2 term plus the
    single incomplete-gamma tail series.
    """
    if int(l) != l or l < 0:
        raise ConfigError("angular momentum l must be a non-negative integer")
    l = int(l)
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0):
        raise ConfigError("coulomb_f needs r >= 0")
    s = 2.0 * r / (l + 1)
    if representation == "double-sum":
        pref = (l + 1) ** 3 * math.factorial(2 * l + 1) / 2.0
        sums = np.array([_f_double_sum(l, float(si), rel_tol) if si > 0 else 0.0 for si in s])
        out = f0 - pref * sums
    elif representation == "hyp-plus-tail":
        a = 2 * l + 3
        g = np.where(s > 0, np.exp(log_lower_incomplete_gamma_int(a, s)), 0.0)
        second = g / (2.0 * math.gamma(2 * l + 4)) * r ** 2 * hyp2f2(1, 2, 3, 2 * l + 4, s, rel_tol)
        third = (l + 1) ** 2 / 4.0 * _f_tail_series(l, s, rel_tol)
        out = f0 - second + third
        out = np.where(s > 0, out, f0)
    else:
        raise ConfigError(f"unknown representation {representation!r}")
    return float(out[0]) if scalar else out
