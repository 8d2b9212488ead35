"""European call written on the allowance certificate.

The option value ``v`` solves the same backward equation as the allowance
price, except that the transport speed is ``mu_e(alpha, D)``, read from the
already-solved allowance surface. That makes the problem linear in ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pde
from .dynamics import JacobiParams
from .errors import GridError, MissingAllowanceError, ParameterError
from .scheme import SchemeParams
from .stack import StackParams

# placeholders: no published strike or maturity accompanies the option example
DEFAULT_STRIKE = 50.0
DEFAULT_MATURITY_FRACTION = 0.5


@dataclass(frozen=True)
class OptionSpec:
    maturity: float
    strike: float = DEFAULT_STRIKE

    def validate(self, horizon):
        if not (np.isfinite(self.strike) and self.strike >= 0):
            raise ParameterError("strike must be finite and >= 0")
        if not 0 <= self.maturity <= horizon * (1 + 1e-12):
            raise ParameterError(f"maturity must lie in [0, {horizon:g}]")


def call_upper_bound(spec: OptionSpec, scheme: SchemeParams, t):
    """``exp(-r (tau - t)) * (exp(-r (T - tau)) pi - K)^+``."""
    r, T, tau = scheme.rate, scheme.horizon, spec.maturity
    return math.exp(-r * (tau - t)) * max(math.exp(-r * (T - tau)) * scheme.penalty - spec.strike, 0.0)


def solve_call(spec: OptionSpec, allowance: pde.SurfaceSeries, scheme: SchemeParams,
               dyn: JacobiParams, stack: StackParams, grid: pde.Grid | None = None,
               *, levels="all", n_a=pde.DEFAULT_PRICE_LEVELS, cfl="raise") -> pde.SurfaceSeries:
    """Call value on the allowance grid for times ``0 <= t <= maturity``.

    ``allowance`` must hold every time level from 0 up to the maturity.
    """
    grid = allowance.grid if grid is None else grid
    if grid != allowance.grid:
        raise GridError("option grid differs from the allowance grid")
    spec.validate(scheme.horizon)
    k_tau = grid.time_index(spec.maturity, "maturity")
    if not allowance.has_level(k_tau):
        raise MissingAllowanceError(f"allowance surface has no level at maturity (k = {k_tau})")
    stable = pde.check_cfl(grid, dyn, stack, scheme.rate, cfl)

    K, r, T, pi = spec.strike, scheme.rate, scheme.horizon, scheme.penalty
    terminal = np.maximum(allowance.level(k_tau) - K, 0.0)
    dt = grid.delta_t
    growth = math.exp(r * (T - spec.maturity))

    def top(k):
        return math.exp(-r * (T - k * dt)) * max(pi - growth * K, 0.0)

    upper = max(pi - K, 0.0)
    meta = {"kind": "call", "strike": K, "maturity": spec.maturity, "maturity_level": k_tau}
    return pde.solve_linear(terminal, k_tau, allowance, dyn, stack, r, top, upper,
                            a_max=pi, levels=levels, n_a=n_a, label="call", meta=meta,
                            strict=stable)


def price_call(spec: OptionSpec, allowance: pde.SurfaceSeries, scheme: SchemeParams,
               dyn: JacobiParams, stack: StackParams, d0, e0=0.0, **kw):
    """Call value at ``t = 0`` for demand ``d0`` and emissions ``e0``."""
    v = solve_call(spec, allowance, scheme, dyn, stack, levels=[0], **kw)
    return pde.evaluate(v, 0.0, d0, e0)


__all__ = [
    "DEFAULT_MATURITY_FRACTION", "DEFAULT_STRIKE", "OptionSpec", "call_upper_bound",
    "price_call", "solve_call",
]
