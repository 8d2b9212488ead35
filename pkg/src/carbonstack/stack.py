"""Bid stack, marginal emissions stack and the carbon-adjusted merit order.

A positive allowance price ``a`` adds ``a * e(xi)`` to every bid, which can
move cheap but dirty capacity behind cleaner capacity. For the parametric
stacks used here the adjusted bid ``g(a, .)`` is strictly convex, so the set of
dispatched capacity is a single interval ``[lo, hi]`` of measure ``d`` on which
``g`` stays below the marginal price.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import kernels
from .errors import ConvergenceError, DomainError, ParameterError

HOURS_PER_YEAR = 24 * 365


@dataclass(frozen=True)
class StackParams:
    """Power-law bid stack and marginal emissions stack.

    ``bid(xi) = b_min + (b_max - b_min) * (xi / xi_max) ** theta1``
    ``e(xi) = e_max - (e_max - e_min) * (xi / xi_max) ** theta2``
    """

    b_min: float = 0.0
    b_max: float = 200.0
    theta1: float = 10.0
    e_max: float = 1.2
    e_min: float = 0.4
    theta2: float = 0.4
    kappa: float = float(HOURS_PER_YEAR)
    xi_max: float = 30000.0

    def __post_init__(self):
        problems = []
        if not self.b_min >= 0:
            problems.append("b_min must be >= 0")
        if not self.b_max >= self.b_min:
            problems.append("b_max must be >= b_min")
        if not self.theta1 > 2:
            problems.append("theta1 must be > 2")
        if not self.e_min > 0:
            problems.append("e_min must be > 0")
        if not self.e_max > self.e_min:
            problems.append("e_max must be > e_min")
        if not 0 <= self.theta2 < 1:
            problems.append("theta2 must lie in [0, 1)")
        if not self.kappa > 0:
            problems.append("kappa must be > 0")
        if not self.xi_max > 0:
            problems.append("xi_max must be > 0")
        if problems:
            raise ParameterError("invalid StackParams: " + "; ".join(problems))

    @property
    def coeffs(self):
        return (float(self.b_min), float(self.b_max - self.b_min), float(self.theta1),
                float(self.e_max), float(self.e_max - self.e_min), float(self.theta2),
                float(self.xi_max))

    def antiderivative(self, xi):
        """Primitive of the marginal emissions stack, zero at ``xi = 0``."""
        xi = np.asarray(xi, dtype=np.float64)
        span = self.e_max - self.e_min
        return self.e_max * xi - span * xi * (xi / self.xi_max) ** self.theta2 / (self.theta2 + 1.0)


@dataclass(frozen=True)
class CustomStack:
    """User-supplied stacks given as callables on ``[0, xi_max]``.

    ``bid + a * emissions`` must be convex in ``xi`` for every ``a >= 0`` so the
    active set stays an interval; minimizers come from a bounded golden-section
    search and emission integrals from adaptive quadrature.
    """

    bid: Callable[[float], float]
    emissions: Callable[[float], float]
    xi_max: float
    kappa: float = float(HOURS_PER_YEAR)

    def __post_init__(self):
        if not self.xi_max > 0 or not self.kappa > 0:
            raise ParameterError("xi_max and kappa must be > 0")


@dataclass(frozen=True)
class ActiveSet:
    """Dispatched capacity ``[lo, hi]`` in MW."""

    lo: float
    hi: float

    @property
    def measure(self):
        return self.hi - self.lo


def _check_range(name, x, upper):
    x = np.asarray(x, dtype=np.float64)
    slack = 1e-12 * upper
    if np.any(~np.isfinite(x)) or np.any(x < -slack) or np.any(x > upper + slack):
        raise DomainError(f"{name} outside [0, {upper:g}]")
    return np.clip(x, 0.0, upper)


def _check_price(a):
    a = np.asarray(a, dtype=np.float64)
    if np.any(~np.isfinite(a)) or np.any(a < 0):
        raise DomainError("allowance price must be finite and >= 0")
    return a


def _scalar_or_array(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def bau_bid(p, xi):
    """Business-as-usual bid level at supply ``xi`` (currency/MWh)."""
    xi = _check_range("xi", xi, p.xi_max)
    if isinstance(p, CustomStack):
        return _scalar_or_array(np.vectorize(p.bid, otypes=[float])(xi))
    return _scalar_or_array(kernels.bid_numpy(0.0, xi, p.coeffs))


def marginal_emissions(p, xi):
    """Emissions rate of the marginal unit at supply ``xi`` (tCO2/MWh)."""
    xi = _check_range("xi", xi, p.xi_max)
    if isinstance(p, CustomStack):
        return _scalar_or_array(np.vectorize(p.emissions, otypes=[float])(xi))
    return _scalar_or_array(p.e_max - (p.e_max - p.e_min) * (xi / p.xi_max) ** p.theta2)


def adjusted_bid(p, a, xi):
    """Bid level after passing the carbon cost ``a * e(xi)`` through."""
    a = _check_price(a)
    return _scalar_or_array(np.asarray(bau_bid(p, xi)) + a * np.asarray(marginal_emissions(p, xi)))


# --------------------------------------------------------------------------
# generic route for CustomStack
# --------------------------------------------------------------------------

def _custom_left_end(p: CustomStack, a, d):
    g = lambda x: p.bid(x) + a * p.emissions(x)
    xm = p.xi_max
    res = optimize.minimize_scalar(g, bounds=(0.0, xm), method="bounded",
                                   options={"xatol": kernels.ENDPOINT_RTOL * xm})
    m = float(res.x)
    # a boundary minimizer is reported slightly inside by the bounded search
    for edge in (0.0, xm):
        if g(edge) <= g(m):
            m = edge
    lo, hi = max(0.0, m - d), min(m, xm - d)
    if hi <= lo:
        return lo
    h = lambda x: g(x + d) - g(x)
    if h(lo) >= 0:
        return lo
    if h(hi) <= 0:
        return hi
    try:
        return optimize.bisect(h, lo, hi, xtol=kernels.ENDPOINT_RTOL * xm, maxiter=400)
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from exc


def _custom_rate(p: CustomStack, lo, hi):
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(p.emissions, lo, hi, epsabs=0.0, epsrel=1e-9, limit=200)
    return p.kappa * val


# --------------------------------------------------------------------------
# merit order
# --------------------------------------------------------------------------

def active_bounds(p, a, d):
    """Vectorised endpoints ``(lo, hi)`` of the active set for arrays ``a``, ``d``."""
    a = _check_price(a)
    d = _check_range("demand", d, p.xi_max)
    a, d = np.broadcast_arrays(a, d)
    shape = a.shape
    if isinstance(p, CustomStack):
        lo = np.array([_custom_left_end(p, float(x), float(y)) for x, y in zip(a.ravel(), d.ravel())])
    else:
        lo = kernels.active_left_end(a, d, p.coeffs)
    if np.any(~np.isfinite(lo)):
        raise ConvergenceError("active-set bisection did not converge")
    lo = lo.reshape(shape)
    hi = np.minimum(lo + d, p.xi_max)
    return lo, hi


def active_set(p, a, d) -> ActiveSet:
    """Interval of generation dispatched at allowance price ``a`` and demand ``d``."""
    if np.ndim(a) or np.ndim(d):
        raise DomainError("active_set takes scalars; use active_bounds for arrays")
    lo, hi = active_bounds(p, a, d)
    return ActiveSet(float(lo), float(hi))


def electricity_price(p, a, d):
    """Marginal electricity price: adjusted bid level on the active-set boundary."""
    lo, hi = active_bounds(p, a, d)
    a = np.asarray(a, dtype=np.float64)
    if isinstance(p, CustomStack):
        g = np.vectorize(lambda aa, x: p.bid(x) + aa * p.emissions(x), otypes=[float])
        return _scalar_or_array(np.maximum(g(a, lo), g(a, hi)))
    return _scalar_or_array(np.maximum(kernels.bid_numpy(a, lo, p.coeffs),
                                       kernels.bid_numpy(a, hi, p.coeffs)))


def emissions_rate(p, a, d):
    """Market emissions rate: ``kappa`` times the emissions integral over the active set."""
    lo, hi = active_bounds(p, a, d)
    if isinstance(p, CustomStack):
        out = np.vectorize(lambda x, y: _custom_rate(p, x, y), otypes=[float])(lo, hi)
        return _scalar_or_array(out)
    out = p.kappa * (p.antiderivative(hi) - p.antiderivative(lo))
    return _scalar_or_array(np.maximum(out, 0.0))


def bau_emissions_rate(p, d):
    """Emissions rate with no carbon price: capacity ``[0, d]`` is dispatched."""
    d = _check_range("demand", d, p.xi_max)
    if isinstance(p, CustomStack):
        return _scalar_or_array(np.vectorize(lambda y: _custom_rate(p, 0.0, y), otypes=[float])(d))
    return _scalar_or_array(p.kappa * p.antiderivative(d))


def max_emissions_rate(p):
    """Upper bound of the emissions rate: the whole capacity dispatched."""
    return float(bau_emissions_rate(p, p.xi_max))


def rate_table(p, a_levels, d_levels):
    """``table[q, i] = emissions_rate(a_levels[q], d_levels[i])``."""
    a_levels = np.asarray(a_levels, dtype=np.float64)
    d_levels = np.asarray(d_levels, dtype=np.float64)
    aa, dd = np.meshgrid(a_levels, d_levels, indexing="ij")
    return np.asarray(emissions_rate(p, aa, dd), dtype=np.float64).reshape(aa.shape)


def bid_curvature_roots(p: StackParams, a, n=4001):
    """Count sign changes of ``d/dxi g(a, xi)`` on an ``n``-point grid."""
    xi = np.linspace(0.0, p.xi_max, n)[1:]
    x = xi / p.xi_max
    dg = (p.theta1 * (p.b_max - p.b_min) * x ** (p.theta1 - 1)
          - a * p.theta2 * (p.e_max - p.e_min) * x ** (p.theta2 - 1)) / p.xi_max
    s = np.sign(dg)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


__all__ = [
    "ActiveSet", "CustomStack", "HOURS_PER_YEAR", "StackParams", "active_bounds",
    "active_set", "adjusted_bid", "bau_bid", "bau_emissions_rate", "bid_curvature_roots",
    "electricity_price", "emissions_rate", "marginal_emissions", "max_emissions_rate",
    "rate_table",
]
