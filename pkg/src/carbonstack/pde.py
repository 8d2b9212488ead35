"""Explicit finite differences for the allowance price ``alpha(t, D, E)``.

The value solves, backward in time,

    alpha_t + 1/2 sigma_d^2 alpha_DD + mu_d alpha_D + mu_e(alpha, D) alpha_E - r alpha = 0

on ``[0, xi_max] x [0, e_max]``. Demand uses central differences in the
interior and one-sided differences on the degenerate faces ``D = 0`` and
``D = xi_max``. The transport in ``E`` uses an upwind difference toward
increasing ``E``. The emissions rate reads the price at the known level, so
every step is explicit. The top face ``E = e_max`` carries Dirichlet data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import JacobiParams
from .errors import DomainError, GridError, InstabilityError, MissingAllowanceError, ParameterError
from .scheme import Mechanism, SchemeParams, TwoPeriodScheme
from .stack import StackParams, max_emissions_rate, rate_table

BOUND_SLACK = 1e-8
# The central demand stencil is not monotone where the diffusion vanishes, so
# values may stray O(grid) outside [0, upper]; only larger excursions count as
# instability.
INSTABILITY_RTOL = 1e-3
DEFAULT_PRICE_LEVELS = 512
_NODE_RTOL = 1e-9


class CflWarning(RuntimeWarning):
    """Time step larger than the explicit stability bound."""


@dataclass(frozen=True)
class Grid:
    """Uniform mesh ``D_i = i dD``, ``E_j = j dE``, ``t_k = k dt``."""

    n_d: int
    n_e: int
    n_t: int
    xi_max: float
    e_max: float
    horizon: float

    def __post_init__(self):
        for name in ("n_d", "n_e", "n_t"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise GridError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (self.xi_max > 0 and self.e_max > 0 and self.horizon > 0):
            raise GridError("xi_max, e_max and horizon must be > 0")
        if self.n_d < 2:
            raise GridError("n_d must be >= 2 for the demand stencil")

    @property
    def delta_d(self):
        return self.xi_max / self.n_d

    @property
    def delta_e(self):
        return self.e_max / self.n_e

    @property
    def delta_t(self):
        return self.horizon / self.n_t

    @property
    def d_nodes(self):
        return np.arange(self.n_d + 1) * self.delta_d

    @property
    def e_nodes(self):
        return np.arange(self.n_e + 1) * self.delta_e

    @property
    def t_nodes(self):
        return np.arange(self.n_t + 1) * self.delta_t

    @property
    def shape(self):
        return (self.n_d + 1, self.n_e + 1)

    def with_horizon(self, horizon):
        """Same spatial mesh and time step over another horizon."""
        n = horizon / self.delta_t
        if abs(n - round(n)) > _NODE_RTOL * max(1.0, n):
            raise GridError(f"horizon {horizon:g} is not a multiple of dt {self.delta_t:g}")
        return Grid(self.n_d, self.n_e, int(round(n)), self.xi_max, self.e_max, float(horizon))

    def node_index(self, e, what="value"):
        """Index ``j`` with ``E_j == e``; raises GridError when ``e`` is off-node."""
        x = e / self.delta_e
        j = int(round(x))
        if abs(x - j) > _NODE_RTOL * max(1.0, abs(x)) or not 0 <= j <= self.n_e:
            raise GridError(f"{what} {e:.10g} is not on the E grid (dE = {self.delta_e:.10g}); "
                            "use snap_cap")
        return j

    def time_index(self, t, what="time"):
        x = t / self.delta_t
        k = int(round(x))
        if abs(x - k) > _NODE_RTOL * max(1.0, abs(x)) or not 0 <= k <= self.n_t:
            raise GridError(f"{what} {t:g} is not on the time grid (dt = {self.delta_t:g})")
        return k


def snap_cap(cap, delta_e):
    """Nearest E-node to ``cap`` for mesh width ``delta_e``.

    Nested refinements halve ``delta_e``, so a cap snapped on the coarsest
    level stays a node on every finer level.
    """
    return float(round(cap / delta_e) * delta_e)


def grid_for_caps(n_d, n_e, n_t, caps, e_required, xi_max, horizon):
    """Mesh whose top face is the smallest ``e_max >= e_required`` putting every cap on a node.

    For a single cap ``C`` this is ``e_max = C * n_e / j`` with
    ``j = floor(C * n_e / e_required)``. The top-face data are exact for any
    ``e_max`` past the caps, so stretching the domain costs nothing but a
    slightly wider ``dE``. Several caps must share a common unit; they are
    aligned through their first entry and checked.
    """
    caps = [float(c) for c in np.atleast_1d(caps)]
    base = caps[0]
    if base <= 0:
        return Grid(n_d, n_e, n_t, xi_max, e_required, horizon)
    j = int(math.floor(base * n_e / e_required * (1 + 1e-12)))
    if j < 1:
        raise GridError("cap too small for this E resolution")
    g = Grid(n_d, n_e, n_t, xi_max, base * n_e / j, horizon)
    for c in caps[1:]:
        g.node_index(c, "cap")
    return g


@dataclass
class ValueSurface:
    """Prices on all ``(D_i, E_j)`` nodes at one time level."""

    values: np.ndarray
    time: float
    grid: Grid

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise GridError(f"surface shape {self.values.shape} != grid shape {self.grid.shape}")


@dataclass
class SurfaceSeries:
    """Time levels kept from a backward solve.

    ``values[n]`` is the surface at level ``levels[n]``; ``levels`` is sorted
    ascending. ``top`` is the Dirichlet value on ``E = e_max`` at every level
    (``None`` for series that carry it in their top row only).
    """

    grid: Grid
    levels: np.ndarray
    values: np.ndarray
    label: str = "alpha"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.levels = np.asarray(self.levels, dtype=np.int64)
        self._pos = {int(k): n for n, k in enumerate(self.levels)}

    def __len__(self):
        return len(self.levels)

    def __iter__(self):
        for n in range(len(self.levels)):
            yield self.surface(int(self.levels[n]))

    def has_level(self, k):
        return int(k) in self._pos

    def level(self, k):
        try:
            return self.values[self._pos[int(k)]]
        except KeyError:
            raise MissingAllowanceError(f"time level {k} of {self.label} was not stored") from None

    def surface(self, k):
        return ValueSurface(self.level(k), float(k) * self.grid.delta_t, self.grid)

    def at_time(self, t):
        return self.surface(level_at_or_below(self.grid, t))

    @property
    def initial(self):
        return self.surface(0)

    @property
    def terminal(self):
        return self.surface(self.grid.n_t)


def level_at_or_below(grid, t):
    if not np.isfinite(t) or t < -_NODE_RTOL * grid.horizon or t > grid.horizon * (1 + _NODE_RTOL):
        raise DomainError(f"time {t} outside [0, {grid.horizon:g}]")
    return int(min(grid.n_t, max(0, math.floor(t / grid.delta_t + 1e-9))))


def evaluate(surfaces: SurfaceSeries, t, d, e):
    """Bilinear interpolation in ``(d, e)`` at the stored level at or below ``t``.

    ``e`` above ``e_max`` reads the top face, where the value is the
    boundary data.
    """
    g = surfaces.grid
    vals = surfaces.level(level_at_or_below(g, t))
    d = np.asarray(d, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    if np.any(~np.isfinite(d)) or np.any(d < -1e-12 * g.xi_max) or np.any(d > g.xi_max * (1 + 1e-12)):
        raise DomainError(f"demand outside [0, {g.xi_max:g}]")
    if np.any(~np.isfinite(e)) or np.any(e < -1e-12 * g.e_max):
        raise DomainError("cumulative emissions must be finite and >= 0")
    fx = np.clip(d, 0.0, g.xi_max) / g.delta_d
    fy = np.clip(e, 0.0, g.e_max) / g.delta_e
    i = np.clip(fx.astype(np.intp), 0, g.n_d - 1)
    j = np.clip(fy.astype(np.intp), 0, g.n_e - 1)
    wx = fx - i
    wy = fy - j
    out = ((1 - wx) * ((1 - wy) * vals[i, j] + wy * vals[i, j + 1])
           + wx * ((1 - wy) * vals[i + 1, j] + wy * vals[i + 1, j + 1]))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# stability bound
# ---------------------------------------------------------------------------

def cfl_bound(max_sigma2, max_abs_mu_d, max_mu_e, rate, delta_d, delta_e, horizon, safety=1.0):
    """``safety / (sigma2/dD^2 + |mu_d|/dD + mu_e/dE + r)`` from coefficient maxima.

    Returns ``horizon`` when every coefficient vanishes.
    """
    denom = max_sigma2 / delta_d**2 + max_abs_mu_d / delta_d + max_mu_e / delta_e + rate
    if denom <= 0:
        return float(horizon)
    return float(safety / denom)


def cfl_max_dt(grid: Grid, dyn: JacobiParams, stack: StackParams, rate, safety=1.0):
    """Largest stable time step of the explicit scheme on ``grid``."""
    xm = grid.xi_max
    max_sigma2 = 2.0 * dyn.eta * dyn.sigma_bar * (xm / 2.0) ** 2
    max_mu_d = dyn.eta * max(dyn.d_bar, xm - dyn.d_bar)
    return cfl_bound(max_sigma2, max_mu_d, max_emissions_rate(stack), rate,
                     grid.delta_d, grid.delta_e, grid.horizon, safety)


def check_cfl(grid, dyn, stack, rate, policy):
    if policy not in ("raise", "warn", "ignore"):
        raise ParameterError(f"cfl policy must be raise, warn or ignore, not {policy!r}")
    bound = cfl_max_dt(grid, dyn, stack, rate)
    if grid.delta_t <= bound * (1 + 1e-12):
        return True
    msg = f"dt = {grid.delta_t:.6g} exceeds the explicit stability bound {bound:.6g}"
    if policy == "raise":
        raise InstabilityError(msg)
    if policy == "warn":
        warnings.warn(msg, CflWarning, stacklevel=3)
    return False


def _check_compatible(grid, dyn, stack):
    if abs(grid.xi_max - dyn.xi_max) > 1e-12 * dyn.xi_max or abs(grid.xi_max - stack.xi_max) > 1e-12 * stack.xi_max:
        raise GridError("grid, demand dynamics and stack must share xi_max")


# ---------------------------------------------------------------------------
# discrete operator
# ---------------------------------------------------------------------------

class PdeOperator:
    """Coefficients and the emissions-rate table for one mesh.

    ``rates[q, i]`` is the market emissions rate at price ``q * a_max / (n_a - 1)``
    and demand ``D_i``; the step interpolates it linearly in the price.
    """

    def __init__(self, grid: Grid, dyn: JacobiParams, stack: StackParams, rate,
                 a_max, n_a=DEFAULT_PRICE_LEVELS, zero_transport=False):
        self.grid = grid
        self.rate = float(rate)
        d = grid.d_nodes
        dd = grid.delta_d
        self.diff = dyn.eta * dyn.sigma_bar * d * (grid.xi_max - d) / dd**2
        self.diff[0] = self.diff[-1] = 0.0
        self.drift = -dyn.eta * (d - dyn.d_bar) / dd
        if zero_transport:
            a_max, n_a = 0.0, 1
        if a_max <= 0 or n_a < 2:
            levels = np.zeros(1)
            self.a_step = 1.0
        else:
            levels = np.linspace(0.0, float(a_max), int(n_a))
            self.a_step = float(a_max) / (n_a - 1)
        self.a_max = float(levels[-1])
        if zero_transport:
            self.rates = np.zeros((1, grid.n_d + 1))
        else:
            self.rates = np.ascontiguousarray(rate_table(stack, levels, d))
        self.inv_de = 1.0 / grid.delta_e

    def step(self, u, src, out, top, dt=None):
        """One backward step for stacked slices ``u`` of shape ``(S, nD+1, nE+1)``."""
        dt = self.grid.delta_t if dt is None else dt
        return kernels.pde_step(u, src, out, self.diff, self.drift, self.rates, self.a_step,
                                dt, self.inv_de, self.rate, top)

    def top_row_step(self, u, dt=None):
        """Update of the ``E = e_max`` row with no transport (no node above it)."""
        dt = self.grid.delta_t if dt is None else dt
        c = u[:, :, -1]
        lin = np.empty_like(c)
        lin[:, 1:-1] = (self.diff[None, 1:-1] * (c[:, 2:] - 2 * c[:, 1:-1] + c[:, :-2])
                        + 0.5 * self.drift[None, 1:-1] * (c[:, 2:] - c[:, :-2]))
        lin[:, 0] = self.drift[0] * (c[:, 1] - c[:, 0])
        lin[:, -1] = self.drift[-1] * (c[:, -1] - c[:, -2])
        return c + dt * (lin - self.rate * c)


def _bounds_check(arr, upper, k, label, strict=True):
    """Raise (or, when ``strict`` is false, report) values outside ``[0, upper]``.

    Non-finite values always raise. Returns True when the bounds held.
    """
    lo = float(arr.min())
    hi = float(arr.max())
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InstabilityError(f"{label} is not finite at time level {k}")
    tol = BOUND_SLACK + INSTABILITY_RTOL * upper
    if lo < -tol or hi > upper + tol:
        msg = f"{label} left [0, {upper:g}] at time level {k}: range [{lo:.6g}, {hi:.6g}]"
        if strict:
            raise InstabilityError(msg)
        warnings.warn(msg, CflWarning, stacklevel=4)
        return False
    return True


def step_backward(surface: ValueSurface, dyn: JacobiParams, stack: StackParams, rate,
                  *, top=None, upper=None, operator=None, a_max=None):
    """Advance ``surface`` one time step backward.

    ``top`` is the Dirichlet value for the ``E = e_max`` row at the new time.
    Without it the row is advanced by the same stencil with zero transport.
    An ``upper`` bound enables the instability check.
    """
    g = surface.grid
    if operator is None:
        _check_compatible(g, dyn, stack)
        if a_max is None:
            a_max = max(float(np.max(surface.values)), 0.0)
        operator = PdeOperator(g, dyn, stack, rate, a_max)
    u = surface.values[None]
    out = np.empty_like(u)
    top_row = operator.top_row_step(u) if top is None else np.full((1, g.n_d + 1), float(top))
    operator.step(u, u, out, top_row)
    if not np.all(np.isfinite(out)):
        raise InstabilityError("non-finite value after backward step")
    if upper is not None:
        _bounds_check(out, upper, None, "surface")
    return ValueSurface(out[0], surface.time - g.delta_t, g)


def _normalise_levels(levels, n_t):
    if levels is None or (isinstance(levels, str) and levels == "all"):
        return set(range(n_t + 1))
    if isinstance(levels, str):
        raise ParameterError(f"levels must be 'all' or a collection of indices, not {levels!r}")
    out = set()
    for k in levels:
        k = int(k)
        if not 0 <= k <= n_t:
            raise ParameterError(f"level {k} outside [0, {n_t}]")
        out.add(k)
    return out


def _march(op, u, n_t, top_of_level, upper, keep, label, src_of_level=None, strict=True):
    """Shared backward loop. ``u`` holds level ``n_t`` with shape (S, nD+1, nE+1).

    Inside the stability bound any excursion from ``[0, upper]`` raises. A
    caller that accepted an over-bound step gets at most one warning.
    """
    g = op.grid
    stored = {}
    if n_t in keep:
        stored[n_t] = u.copy()
    out = np.empty_like(u)
    warned = False
    for k in range(n_t, 0, -1):
        src = u if src_of_level is None else src_of_level(k)
        top = np.ascontiguousarray(np.broadcast_to(top_of_level(k - 1), u.shape[:2]), dtype=np.float64)
        op.step(u, src, out, top)
        if warned:
            if not np.all(np.isfinite(out)):
                raise InstabilityError(f"{label} is not finite at time level {k - 1}")
        else:
            warned = not _bounds_check(out, upper, k - 1, label, strict)
        u, out = out, u
        if k - 1 in keep:
            stored[k - 1] = u.copy()
    return u, stored


def _series(grid, stored, label, meta, slice_=0):
    lv = np.array(sorted(stored), dtype=np.int64)
    vals = np.stack([stored[k][slice_] for k in lv]) if len(lv) else np.empty((0,) + grid.shape)
    return SurfaceSeries(grid, lv, vals, label=label, meta=meta)


# ---------------------------------------------------------------------------
# single period
# ---------------------------------------------------------------------------

def solve_backward(grid: Grid, dyn: JacobiParams, stack: StackParams, rate, terminal, top_of_level,
                   upper, *, a_max=None, zero_transport=False, levels="all",
                   n_a=DEFAULT_PRICE_LEVELS, cfl="raise", label="alpha", meta=None) -> SurfaceSeries:
    """March an arbitrary terminal surface back to ``t = 0``.

    ``top_of_level(k)`` gives the Dirichlet value on ``E = e_max`` at level
    ``k``. ``upper`` bounds the solution for the instability check.
    ``zero_transport`` switches the emissions term off, leaving a pure
    demand/discount problem.
    """
    _check_compatible(grid, dyn, stack)
    terminal = np.asarray(terminal, dtype=np.float64)
    if terminal.shape != grid.shape:
        raise GridError(f"terminal shape {terminal.shape} != grid shape {grid.shape}")
    stable = check_cfl(grid, dyn, stack, rate, cfl)
    keep = _normalise_levels(levels, grid.n_t)
    a_max = upper if a_max is None else a_max
    op = PdeOperator(grid, dyn, stack, rate, a_max, n_a, zero_transport=zero_transport)
    u = np.ascontiguousarray(terminal[None]).copy()
    _, stored = _march(op, u, grid.n_t, top_of_level, upper, keep, label, strict=stable)
    return _series(grid, stored, label, meta or {})


def solve_single_period(scheme: SchemeParams, dyn: JacobiParams, stack: StackParams, grid: Grid,
                        *, levels="all", n_a=DEFAULT_PRICE_LEVELS, cfl="raise") -> SurfaceSeries:
    """Allowance price on every stored time level of ``grid``.

    ``levels`` selects which time indices to keep ("all" by default); the
    finest meshes need a lot of memory otherwise.
    """
    _check_compatible(grid, dyn, stack)
    if abs(grid.horizon - scheme.horizon) > 1e-12 * scheme.horizon:
        raise GridError("grid horizon differs from the compliance period")
    if grid.e_max > scheme.e_max * (1 + 1e-12):
        raise GridError("grid e_max exceeds the scheme's e_max")
    j_cap = grid.node_index(scheme.e_cap, "e_cap")
    pi, r, T, dt = scheme.penalty, scheme.rate, grid.horizon, grid.delta_t
    terminal = np.zeros(grid.shape)
    terminal[:, j_cap:] = pi
    meta = {"kind": "single_period", "penalty": pi, "e_cap": scheme.e_cap, "cap_index": j_cap,
            "rate": r, "price_levels": n_a}
    return solve_backward(grid, dyn, stack, r, terminal, lambda k: math.exp(-r * (T - k * dt)) * pi,
                          pi, levels=levels, n_a=n_a, cfl=cfl, meta=meta)


# ---------------------------------------------------------------------------
# two periods
# ---------------------------------------------------------------------------

@dataclass
class TwoPeriodSolution:
    """``alpha1`` over ``[0, T1]`` and the second-period values at ``T1``.

    ``alpha2_start[s, i, j]`` is ``alpha2(T1, D_i, E_j; E1 = E_s)``; the
    coupling reads its ``j = 0`` column.
    """

    alpha1: SurfaceSeries
    alpha2_start: np.ndarray
    grid1: Grid
    grid2: Grid

    @property
    def coupling(self):
        """``alpha2(T1, D_i, 0; E1 = E_j)`` laid out as ``[i, j]``."""
        return self.alpha2_start[:, :, 0].T.copy()


def _period2_terminal(grid, j_total):
    n = grid.n_e + 1
    s = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    supply = np.maximum(j_total - s, 0)
    return j >= supply  # (slice, j)


def solve_two_period(scheme: TwoPeriodScheme, dyn: JacobiParams, stack: StackParams, grid: Grid,
                     *, levels="all", n_a=DEFAULT_PRICE_LEVELS, cfl="raise",
                     grid2: Grid | None = None, e1_grid=None) -> TwoPeriodSolution:
    """Backward solve of both periods linked through banking and withdrawal.

    ``grid`` covers the first period. The second period uses ``grid2`` if
    given, otherwise the same mesh and time step over its own horizon. Every
    E-node is one first-period outcome ``E1``.
    """
    p1, p2 = scheme.period1, scheme.period2
    _check_compatible(grid, dyn, stack)
    if abs(grid.horizon - p1.horizon) > 1e-12 * p1.horizon:
        raise GridError("grid horizon differs from the first compliance period")
    grid2 = grid.with_horizon(p2.horizon) if grid2 is None else grid2
    if (grid2.n_d, grid2.n_e, grid2.e_max, grid2.xi_max) != (grid.n_d, grid.n_e, grid.e_max, grid.xi_max):
        raise GridError("both periods must use the same (D, E) mesh")
    if e1_grid is not None and (len(e1_grid) != grid.n_e + 1
                                or not np.allclose(e1_grid, grid.e_nodes, rtol=0, atol=1e-9 * grid.e_max)):
        raise GridError("E1 slices must coincide with the E grid")
    if grid.e_max > scheme.e_max * (1 + 1e-12):
        raise GridError("grid e_max exceeds the scheme's e_max")
    j1 = grid.node_index(p1.e_cap, "first-period cap")
    j2 = grid.node_index(p2.e_cap, "second-period cap")
    stable = check_cfl(grid, dyn, stack, scheme.rate, cfl)
    stable = check_cfl(grid2, dyn, stack, scheme.rate, cfl) and stable
    keep = _normalise_levels(levels, grid.n_t)
    r = scheme.rate

    # period 2, one slice per first-period outcome
    pi2 = p2.penalty
    op2 = PdeOperator(grid2, dyn, stack, r, pi2, n_a)
    hit = _period2_terminal(grid, j1 + j2)
    u2 = np.ascontiguousarray(np.broadcast_to(np.where(hit, pi2, 0.0)[:, None, :],
                                              (grid.n_e + 1,) + grid.shape))
    dt2, T2 = grid2.delta_t, grid2.horizon
    a2, _ = _march(op2, u2, grid2.n_t, lambda k: math.exp(-r * (T2 - k * dt2)) * pi2, pi2, set(),
                   "alpha2", strict=stable)
    alpha2_start = a2.copy()
    coupling = alpha2_start[:, :, 0].T  # [i, j] with E1 = E_j

    # period 1
    top_val = p1.penalty + scheme.extra_penalty
    j = np.arange(grid.n_e + 1)[None, :]
    if scheme.mechanism is Mechanism.BANKING_WITHDRAWAL:
        term = np.where(j < j1, coupling, p1.penalty + coupling)
    else:
        term = coupling.copy()
    term = np.where(j >= j1 + j2, top_val, term)
    op1 = PdeOperator(grid, dyn, stack, r, top_val, n_a)
    u1 = np.ascontiguousarray(term[None])
    dt1, T1 = grid.delta_t, grid.horizon
    _, stored = _march(op1, u1, grid.n_t, lambda k: math.exp(-r * (T1 - k * dt1)) * top_val,
                       top_val, keep, "alpha1", strict=stable)
    meta = {"kind": "two_period", "mechanism": scheme.mechanism.value, "cap_indices": [j1, j2],
            "penalties": [p1.penalty, pi2, scheme.extra_penalty], "rate": r, "price_levels": n_a}
    return TwoPeriodSolution(_series(grid, stored, "alpha1", meta), alpha2_start, grid, grid2)


# ---------------------------------------------------------------------------
# linear problem driven by a stored allowance surface
# ---------------------------------------------------------------------------

def solve_linear(terminal, start_level, allowance: SurfaceSeries, dyn, stack, rate, top_of_level,
                 upper, *, a_max, levels="all", n_a=DEFAULT_PRICE_LEVELS, label="v", meta=None,
                 strict=True):
    """March ``terminal`` at ``start_level`` back to ``t = 0``.

    The transport speed reads the stored allowance level rather than the
    unknown, so the problem is linear. The returned series lives on the
    allowance grid and holds levels ``0..start_level`` only.
    """
    grid = allowance.grid
    missing = [k for k in range(start_level + 1) if not allowance.has_level(k)]
    if missing:
        raise MissingAllowanceError(
            f"allowance surface lacks {len(missing)} time levels in [0, {start_level}] "
            f"(first missing: {missing[0]})")
    keep = _normalise_levels(levels, start_level)
    op = PdeOperator(grid, dyn, stack, rate, a_max, n_a)
    u = np.ascontiguousarray(np.asarray(terminal, dtype=np.float64)[None])
    _, stored = _march(op, u, start_level, top_of_level, upper, keep, label,
                       src_of_level=lambda k: allowance.level(k)[None], strict=strict)
    return _series(grid, stored, label, meta or {})


__all__ = [
    "BOUND_SLACK", "CflWarning", "INSTABILITY_RTOL", "check_cfl", "DEFAULT_PRICE_LEVELS", "Grid", "PdeOperator", "SurfaceSeries",
    "TwoPeriodSolution", "ValueSurface", "cfl_bound", "cfl_max_dt", "evaluate",
    "grid_for_caps", "level_at_or_below", "snap_cap", "solve_backward", "solve_linear", "solve_single_period", "solve_two_period",
    "step_backward",
]

