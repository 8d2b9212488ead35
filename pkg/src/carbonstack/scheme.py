"""Compliance periods, caps, penalties and the terminal payoffs they induce."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, MechanismError, ParameterError


class Mechanism(str, enum.Enum):
    """How the two compliance periods are connected."""

    BANKING_WITHDRAWAL = "bw"
    BANKING_BORROWING_WITHDRAWAL = "bbw"


@dataclass(frozen=True)
class SchemeParams:
    """One compliance period.

    Attributes:
        e_cap: allowances issued (tCO2).
        penalty: charge per tonne not covered at the end of the period.
        horizon: period length in years.
        rate: continuously compounded risk-free rate.
        e_max: largest attainable cumulative emissions (tCO2).
    """

    e_cap: float = 1.17e8
    penalty: float = 100.0
    horizon: float = 1.0
    rate: float = 0.05
    e_max: float = 8760.0 * (1.2 * 30000.0 - 0.8 * 30000.0 / 1.4)

    def __post_init__(self):
        problems = []
        if not self.e_cap >= 0:
            problems.append("e_cap must be >= 0")
        if not self.penalty >= 0:
            problems.append("penalty must be >= 0")
        if not self.horizon > 0:
            problems.append("horizon must be > 0")
        if not self.rate >= 0:
            problems.append("rate must be >= 0")
        if not self.e_cap <= self.e_max:
            problems.append("e_cap must not exceed e_max")
        if problems:
            raise ParameterError("invalid SchemeParams: " + "; ".join(problems))

    def with_penalty(self, penalty):
        return replace(self, penalty=float(penalty))

    def discount(self, t):
        """``exp(-r (T - t))``."""
        return math.exp(-self.rate * (self.horizon - t))


@dataclass(frozen=True)
class TwoPeriodScheme:
    """Two consecutive compliance periods with banking and withdrawal.

    ``extra_penalty`` is charged on top of ``period1.penalty`` for excess
    emissions that cannot be covered by withdrawing second-period allowances.
    It defaults to ``period2.penalty``.
    """

    period1: SchemeParams
    period2: SchemeParams
    extra_penalty: float | None = None
    mechanism: Mechanism = Mechanism.BANKING_WITHDRAWAL

    def __post_init__(self):
        object.__setattr__(self, "mechanism", Mechanism(self.mechanism))
        if self.extra_penalty is None:
            object.__setattr__(self, "extra_penalty", float(self.period2.penalty))
        p1, p2 = self.period1, self.period2
        if p1.rate != p2.rate or p1.e_max != p2.e_max:
            raise ParameterError("both periods must share rate and e_max")
        floor = math.exp(-p2.rate * p2.horizon) * p2.penalty
        if self.extra_penalty < floor * (1.0 - 1e-12):
            raise ParameterError(
                f"extra_penalty {self.extra_penalty:g} below discounted second-period penalty {floor:g}")

    @property
    def rate(self):
        return self.period1.rate

    @property
    def e_max(self):
        return self.period1.e_max

    @property
    def combined_cap(self):
        return self.period1.e_cap + self.period2.e_cap


def _check_emissions(x, e_max, name="cumulative emissions"):
    arr = np.asarray(x, dtype=np.float64)
    slack = 1e-12 * e_max
    if np.any(~np.isfinite(arr)) or np.any(arr < -slack) or np.any(arr > e_max + slack):
        raise DomainError(f"{name} outside [0, {e_max:g}]")
    return arr


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def single_period_terminal(s: SchemeParams, e_t):
    """Allowance value at the compliance date: ``penalty`` once the cap is reached."""
    e_t = _check_emissions(e_t, s.e_max)
    return _out(np.where(e_t >= s.e_cap, s.penalty, 0.0))


def aggregate_supply_period2(s: TwoPeriodScheme, e1):
    """Second-period allowances after banking the surplus or withdrawing the deficit."""
    e1 = _check_emissions(e1, s.e_max, "first-period emissions")
    return _out(np.maximum(s.combined_cap - e1, 0.0))


def phi2(s: TwoPeriodScheme, e_t2, e1):
    """Second-period terminal payoff given first-period emissions ``e1``."""
    e_t2 = _check_emissions(e_t2, s.e_max)
    supply = np.asarray(aggregate_supply_period2(s, e1))
    return _out(np.where(e_t2 >= supply, s.period2.penalty, 0.0))


def _check_a2(s, a2):
    a2 = np.asarray(a2, dtype=np.float64)
    if np.any(~np.isfinite(a2)) or np.any(a2 < 0):
        raise DomainError("second-period allowance value must be finite and >= 0")
    return a2


def phi1_banking_withdrawal(s: TwoPeriodScheme, e_t1, a2_at_t1):
    """First-period terminal payoff under banking and withdrawal."""
    if s.mechanism is not Mechanism.BANKING_WITHDRAWAL:
        raise MechanismError(f"scheme mechanism is {s.mechanism.value!r}, not 'bw'")
    return _phi1_bw(s, e_t1, a2_at_t1)


def phi1_borrowing(s: TwoPeriodScheme, e_t1, a2_at_t1):
    """First-period terminal payoff when borrowing is also allowed."""
    if s.mechanism is not Mechanism.BANKING_BORROWING_WITHDRAWAL:
        raise MechanismError(f"scheme mechanism is {s.mechanism.value!r}, not 'bbw'")
    return _phi1_bbw(s, e_t1, a2_at_t1)


def _phi1_bw(s, e_t1, a2):
    e = _check_emissions(e_t1, s.e_max)
    a2 = _check_a2(s, a2)
    p1 = s.period1.penalty
    out = np.where(e < s.period1.e_cap, a2, p1 + a2)
    return _out(np.where(e >= s.combined_cap, p1 + s.extra_penalty, out))


def _phi1_bbw(s, e_t1, a2):
    e = _check_emissions(e_t1, s.e_max)
    a2 = _check_a2(s, a2)
    return _out(np.where(e >= s.combined_cap, s.period1.penalty + s.extra_penalty, a2))


def phi1(s: TwoPeriodScheme, e_t1, a2_at_t1):
    """First-period payoff for whichever mechanism ``s`` uses."""
    if s.mechanism is Mechanism.BANKING_WITHDRAWAL:
        return _phi1_bw(s, e_t1, a2_at_t1)
    return _phi1_bbw(s, e_t1, a2_at_t1)


def max_payoff(s):
    """Largest terminal value the scheme can produce."""
    if isinstance(s, TwoPeriodScheme):
        return s.period1.penalty + s.extra_penalty
    return s.penalty


__all__ = [
    "Mechanism", "SchemeParams", "TwoPeriodScheme", "aggregate_supply_period2",
    "max_payoff", "phi1", "phi1_banking_withdrawal", "phi1_borrowing", "phi2",
    "single_period_terminal",
]

