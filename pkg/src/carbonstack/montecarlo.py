"""Euler simulation of demand and cumulative emissions under a solved price.

Per step the allowance price is read off the stored surface, emissions grow
at the market rate for that price, and demand takes an Euler step that is
reflected back into ``[0, xi_max]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, pde
from .dynamics import JacobiParams
from .errors import MissingAllowanceError, ParameterError
from .scheme import SchemeParams
from .stack import StackParams, rate_table

DEFAULT_BATCH = 8192
DEFAULT_PRICE_LEVELS = 257
DEFAULT_DEMAND_CELLS = 3000


@dataclass(frozen=True)
class PathConfig:
    n_paths: int = 100_000
    n_steps: int = 365
    seed: int = 20240101
    d0: float = 21000.0
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ParameterError("n_paths must be a positive integer")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError("n_steps must be a positive integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise ParameterError("batch_size must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError("seed must be a non-negative integer")


@dataclass(frozen=True)
class McResult:
    """Mean terminal emissions and its standard error (NaN for one path)."""

    mean_emissions: float
    std_error: float
    penalty: float
    n_paths: int = 0
    terminal: np.ndarray | None = field(default=None, repr=False, compare=False)


def mc_levels(grid: pde.Grid, n_steps):
    """Time levels of ``grid`` at or below each simulation date ``k T / n_steps``."""
    t = np.arange(n_steps) * (grid.horizon / n_steps)
    return np.minimum(np.floor(t / grid.delta_t + 1e-9).astype(np.int64), grid.n_t)


def mean_and_stderr(x):
    """Sample mean and ``sqrt(sum (x - mean)^2 / (n (n - 1)))``.

    Deviations are taken from the first sample, so identical samples give an
    error of exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    shift = x[0]
    y = x - shift
    m = y.mean()
    if n < 2:
        return float(m + shift), math.nan
    ss = float(np.sum((y - m) ** 2))
    return float(m + shift), math.sqrt(ss / (n * (n - 1.0)))


def _demand_table(stack, a_max, n_a, n_cells):
    d = np.linspace(0.0, stack.xi_max, n_cells + 1)
    if a_max <= 0:
        a = np.zeros(1)
    else:
        a = np.linspace(0.0, a_max, n_a)
    return np.ascontiguousarray(rate_table(stack, a, d))


def simulate(cfg: PathConfig, dyn: JacobiParams, stack: StackParams, scheme: SchemeParams,
             allowance: pde.SurfaceSeries, *, n_a=DEFAULT_PRICE_LEVELS,
             n_demand_cells=DEFAULT_DEMAND_CELLS, keep_paths=False, table=None) -> McResult:
    """Mean cumulative emissions at the horizon over ``cfg.n_paths`` Euler paths.

    Paths are drawn in fixed-size batches, each from its own child of
    ``SeedSequence(cfg.seed)``. Results therefore depend on the seed only.
    """
    grid = allowance.grid
    if abs(grid.horizon - scheme.horizon) > 1e-12 * scheme.horizon:
        raise ParameterError("allowance grid horizon differs from the compliance period")
    if not 0 <= cfg.d0 <= dyn.xi_max:
        raise ParameterError(f"d0 must lie in [0, {dyn.xi_max:g}]")
    if dyn.sigma_bar < 0 or dyn.eta < 0:
        raise ParameterError("eta and sigma_bar must be >= 0")
    lv = mc_levels(grid, cfg.n_steps)
    used = np.unique(lv)
    missing = [int(k) for k in used if not allowance.has_level(k)]
    if missing:
        raise MissingAllowanceError(
            f"allowance surface lacks {len(missing)} levels needed by the simulation "
            f"(first missing: {missing[0]})")
    stacked = np.ascontiguousarray(np.stack([allowance.level(k) for k in used]))
    level_of_step = np.searchsorted(used, lv).astype(np.int64)

    a_max = float(scheme.penalty)
    tab = _demand_table(stack, a_max, n_a, n_demand_cells) if table is None else table
    dt = scheme.horizon / cfg.n_steps
    sig2_scale = 2.0 * dyn.eta * dyn.sigma_bar

    n_batches = -(-cfg.n_paths // cfg.batch_size)
    children = np.random.SeedSequence(cfg.seed).spawn(n_batches)
    out = np.empty(cfg.n_paths)
    for b, child in enumerate(children):
        lo = b * cfg.batch_size
        hi = min(cfg.n_paths, lo + cfg.batch_size)
        rng = np.random.Generator(np.random.PCG64(child))
        normals = rng.standard_normal((hi - lo, cfg.n_steps))
        out[lo:hi] = kernels.simulate_paths(
            cfg.d0, stacked, level_of_step, normals, tab, a_max, dyn.d_bar, dyn.eta,
            sig2_scale, dyn.xi_max, grid.e_max, dt, grid.delta_e)
    mean, se = mean_and_stderr(out)
    return McResult(mean, se, float(scheme.penalty), cfg.n_paths, out if keep_paths else None)


def solve_for_simulation(scheme: SchemeParams, dyn, stack, grid: pde.Grid, n_steps, **kw):
    """Allowance solve keeping only the levels a simulation with ``n_steps`` reads."""
    return pde.solve_single_period(scheme, dyn, stack, grid,
                                   levels=set(mc_levels(grid, n_steps).tolist()), **kw)


def penalty_sweep(penalties, cfg: PathConfig, dyn: JacobiParams, stack: StackParams,
                  scheme: SchemeParams, grid: pde.Grid, *, solver_kw=None, **kw):
    """One allowance solve and one simulation per penalty, same seed throughout."""
    solver_kw = solver_kw or {}
    results = []
    for pi in penalties:
        s = scheme.with_penalty(pi)
        alpha = solve_for_simulation(s, dyn, stack, grid, cfg.n_steps, **solver_kw)
        results.append(simulate(cfg, dyn, stack, s, alpha, **kw))
    return results


__all__ = [
    "DEFAULT_BATCH", "McResult", "PathConfig", "mc_levels", "mean_and_stderr",
    "penalty_sweep", "simulate", "solve_for_simulation",
]
