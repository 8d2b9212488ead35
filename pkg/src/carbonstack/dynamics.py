"""Jacobi demand diffusion and the boundary classification it implies.

    dD = -eta (D - d_bar) dt + sqrt(2 eta sigma_bar D (xi_max - D)) dW

The diffusion degenerates at both ends of ``[0, xi_max]``. One coefficient set
is used for pricing and for simulation (zero market price of demand risk).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class JacobiParams:
    eta: float = 10.0
    d_bar: float = 21000.0
    sigma_bar: float = 0.05
    xi_max: float = 30000.0
    d0: float = 21000.0

    def violations(self):
        """Human-readable list of broken invariants (empty when valid)."""
        out = []
        if not self.eta > 0:
            out.append("eta must be > 0")
        if not self.sigma_bar > 0:
            out.append("sigma_bar must be > 0")
        if not self.xi_max > 0:
            out.append("xi_max must be > 0")
        if not 0 < self.d_bar < self.xi_max:
            out.append("d_bar must lie in (0, xi_max)")
        if not 0 < self.d0 < self.xi_max:
            out.append("d0 must lie in (0, xi_max)")
        if self.xi_max > 0 and min(self.d_bar, self.xi_max - self.d_bar) < self.xi_max * self.sigma_bar:
            out.append(
                "boundary attainable: min(d_bar, xi_max - d_bar) = "
                f"{min(self.d_bar, self.xi_max - self.d_bar):g} < xi_max * sigma_bar = "
                f"{self.xi_max * self.sigma_bar:g}")
        return out


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok


def validate(p: JacobiParams) -> ValidityReport:
    return ValidityReport(tuple(p.violations()))


def _demand(p, d):
    arr = np.asarray(d, dtype=np.float64)
    slack = 1e-12 * p.xi_max
    if np.any(~np.isfinite(arr)) or np.any(arr < -slack) or np.any(arr > p.xi_max + slack):
        raise DomainError(f"demand outside [0, {p.xi_max:g}]")
    return np.clip(arr, 0.0, p.xi_max)


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def drift(p: JacobiParams, d):
    d = _demand(p, d)
    return _out(-p.eta * (d - p.d_bar))


def diffusion_squared(p: JacobiParams, d):
    d = _demand(p, d)
    return _out(2.0 * p.eta * p.sigma_bar * d * (p.xi_max - d))


def diffusion(p: JacobiParams, d):
    return _out(np.sqrt(np.maximum(diffusion_squared(p, d), 0.0)))


def fichera(p: JacobiParams, d, mu_e_val, n):
    """Fichera function on the boundary for inward normal ``n = (n_d, n_e)``.

    ``f >= 0`` means information flows out and no boundary data are needed.
    """
    n_d, n_e = n
    d = np.asarray(d, dtype=np.float64)
    f = p.eta * ((p.d_bar - p.sigma_bar * p.xi_max) + (2.0 * p.sigma_bar - 1.0) * d) * n_d
    return _out(f + np.asarray(mu_e_val, dtype=np.float64) * n_e)


def stationary_beta_parameters(p: JacobiParams):
    """Shape parameters of the Beta law of ``D / xi_max`` at stationarity."""
    return p.d_bar / (p.xi_max * p.sigma_bar), (p.xi_max - p.d_bar) / (p.xi_max * p.sigma_bar)


__all__ = [
    "JacobiParams", "ValidityReport", "diffusion", "diffusion_squared", "drift", "fichera",
    "stationary_beta_parameters", "validate",
]

