"""Grid refinement study: relative errors between nested meshes and the fitted rate."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from . import pde
from .dynamics import JacobiParams
from .errors import ConvergenceError, GridError, ParameterError
from .scheme import SchemeParams
from .stack import StackParams, max_emissions_rate


@dataclass(frozen=True)
class RefinementLevel:
    label: int
    n_d: int
    n_e: int
    n_t: int

    def grid(self, xi_max, e_max, horizon):
        return pde.Grid(self.n_d, self.n_e, self.n_t, xi_max, e_max, horizon)


# each level doubles the spatial counts and quadruples the time steps
TABLE5_LEVELS = tuple(
    RefinementLevel(l + 1, 6 * 2**l, 100 * 2**l, 110 * 4**l) for l in range(5)
)


def table5_levels(labels):
    by_label = {lv.label: lv for lv in TABLE5_LEVELS}
    try:
        return [by_label[int(x)] for x in labels]
    except KeyError as exc:
        raise ParameterError(f"unknown refinement level {exc.args[0]}; known: 1..5") from None


@dataclass
class ErrorReport:
    """Errors between consecutive levels and the fitted supremum-norm rate.

    ``err_inf[l]`` and ``err_one[l]`` compare level ``l`` with level ``l+1``;
    ``widths[l]`` is the coarse ``dE`` of that pair.
    """

    levels: list
    err_inf: list
    err_one: list
    rate_inf: float
    widths: list
    rate_one: float = math.nan
    seconds: list = field(default_factory=list)
    surfaces: list | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "levels": [lv.label for lv in self.levels],
            "mesh": [[lv.n_d, lv.n_e, lv.n_t] for lv in self.levels],
            "err_inf": list(map(float, self.err_inf)),
            "err_one": list(map(float, self.err_one)),
            "rate_inf": float(self.rate_inf),
            "rate_one": float(self.rate_one),
            "delta_e": list(map(float, self.widths)),
            "seconds": list(map(float, self.seconds)),
        }


def _values(s):
    return s.values if isinstance(s, pde.ValueSurface) else np.asarray(s, dtype=np.float64)


def restrict(fine, coarse_shape):
    """Values of ``fine`` on the nodes of a nested coarse mesh."""
    fine = _values(fine)
    strides = []
    for nf, nc in zip(fine.shape, coarse_shape):
        if nc < 2 or (nf - 1) % (nc - 1):
            raise GridError(f"mesh with {nf} nodes is not a refinement of one with {nc}")
        strides.append((nf - 1) // (nc - 1))
    return fine[::strides[0], ::strides[1]]


def error_norms(coarse, fine):
    """Relative sup- and 1-norm of ``coarse - restrict(fine)``, scaled by the coarse norms.

    The cell area multiplies numerator and denominator of the 1-norm alike and
    drops out.
    """
    c = _values(coarse)
    f = restrict(fine, c.shape)
    diff = np.abs(c - f)
    den_inf = np.max(np.abs(c))
    den_one = np.sum(np.abs(c))
    if den_inf == 0:
        if np.all(diff == 0):
            return 0.0, 0.0
        return math.inf, math.inf
    return float(diff.max() / den_inf), float(diff.sum() / den_one)


def fit_rate(widths, errors):
    """Least-squares slope of ``log(error)`` against ``log(width)``."""
    w = np.asarray(widths, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if len(w) < 2:
        raise ConvergenceError("a rate needs at least two error values")
    if np.any(~(e > 0)) or np.any(~np.isfinite(e)):
        raise ConvergenceError("errors must be positive and finite to fit a rate")
    if np.ptp(np.log(w)) == 0:
        raise ConvergenceError("all mesh widths are equal; the rate is undefined")
    return float(np.polyfit(np.log(w), np.log(e), 1)[0])


def reference_grids(levels: Sequence[RefinementLevel], scheme: SchemeParams, stack: StackParams,
                    alignment="stretch"):
    """Grids for ``levels`` with the cap on a node of every level.

    ``stretch`` widens the E domain just past the emissions bound. ``snap``
    keeps the bound and moves the cap to the nearest node of the coarsest
    level. ``exact`` requires the cap to already be on every grid.
    """
    e_req = max_emissions_rate(stack) * scheme.horizon
    coarse = levels[0]
    if alignment == "stretch":
        e_max = pde.grid_for_caps(coarse.n_d, coarse.n_e, coarse.n_t, scheme.e_cap, e_req,
                                  stack.xi_max, scheme.horizon).e_max
        cap = scheme.e_cap
    elif alignment == "snap":
        e_max = e_req
        cap = pde.snap_cap(scheme.e_cap, e_max / coarse.n_e)
    elif alignment == "exact":
        e_max, cap = e_req, scheme.e_cap
    else:
        raise ParameterError(f"alignment must be stretch, snap or exact, not {alignment!r}")
    s = replace(scheme, e_cap=cap, e_max=max(scheme.e_max, e_max))
    return [lv.grid(stack.xi_max, e_max, scheme.horizon) for lv in levels], s


def refinement_study(levels: Sequence[RefinementLevel], scheme: SchemeParams | None = None,
                     dyn: JacobiParams | None = None, stack: StackParams | None = None, *,
                     alignment="stretch", cfl="warn", n_a=pde.DEFAULT_PRICE_LEVELS,
                     solver: Callable | None = None, keep_surfaces=False, progress=None):
    """Solve on each level and compare consecutive ``t = 0`` surfaces.

    ``solver(level) -> 2-D array`` replaces the allowance problem when given.
    Meshes coarser than the stability bound are solved anyway when ``cfl``
    is ``"warn"`` or ``"ignore"``.
    """
    levels = list(levels)
    if len(levels) < 2:
        raise ParameterError("a refinement study needs at least two levels")
    for a, b in zip(levels, levels[1:]):
        if b.n_d % a.n_d or b.n_e % a.n_e or b.n_t % a.n_t:
            raise GridError(f"level {b.label} is not nested in level {a.label}")
    if solver is None:
        if scheme is None or dyn is None or stack is None:
            raise ParameterError("scheme, dyn and stack are required without a custom solver")
        grids, s = reference_grids(levels, scheme, stack, alignment)

        def solver(lv, _g=dict(zip([x.label for x in levels], grids))):
            with warnings.catch_warnings():
                if cfl != "raise":
                    warnings.simplefilter("ignore", pde.CflWarning)
                return pde.solve_single_period(s, dyn, stack, _g[lv.label], levels=[0],
                                               n_a=n_a, cfl=cfl).level(0)
        e_max = grids[0].e_max
    else:
        e_max = None

    surfaces, seconds = [], []
    for lv in levels:
        t0 = time.perf_counter()
        surfaces.append(np.asarray(solver(lv), dtype=np.float64))
        seconds.append(time.perf_counter() - t0)
        if progress:
            progress(lv, seconds[-1])
    err_inf, err_one = [], []
    for c, f in zip(surfaces, surfaces[1:]):
        a, b = error_norms(c, f)
        err_inf.append(a)
        err_one.append(b)
    widths = [(e_max if e_max is not None else 1.0) / lv.n_e for lv in levels[:-1]]
    rate_inf = fit_rate(widths, err_inf) if len(err_inf) >= 2 else _two_point_rate(levels, err_inf)
    try:
        rate_one = fit_rate(widths, err_one) if len(err_one) >= 2 else _two_point_rate(levels, err_one)
    except ConvergenceError:
        rate_one = math.nan
    return ErrorReport(levels, err_inf, err_one, rate_inf, widths, rate_one, seconds,
                       surfaces if keep_surfaces else None)


def _two_point_rate(levels, errs):
    # a single pair carries no slope information
    if not errs or not errs[0] > 0 or levels[0].n_e == levels[1].n_e:
        raise ConvergenceError("rate undefined: need two distinct, non-identical error values")
    return math.nan


__all__ = [
    "ErrorReport", "RefinementLevel", "TABLE5_LEVELS", "error_norms", "fit_rate",
    "reference_grids", "refinement_study", "restrict", "table5_levels",
]
