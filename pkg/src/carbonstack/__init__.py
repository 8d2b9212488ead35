"""Carbon allowance and allowance-option pricing on a merit-order electricity market."""

__version__ = "0.1.0"

from ._accel import backend_name
from .analysis import ErrorReport, RefinementLevel, TABLE5_LEVELS, error_norms, refinement_study
from .dynamics import JacobiParams, validate
from .errors import (
    CarbonStackError, ConfigError, ConvergenceError, DomainError, GridError, InstabilityError,
    MechanismError, MissingAllowanceError, ParameterError,
)
from .montecarlo import McResult, PathConfig, penalty_sweep, simulate
from .option import OptionSpec, price_call, solve_call
from .pde import (
    Grid, SurfaceSeries, TwoPeriodSolution, ValueSurface, cfl_max_dt, evaluate, grid_for_caps,
    snap_cap, solve_single_period, solve_two_period, step_backward,
)
from .scheme import (
    Mechanism, SchemeParams, TwoPeriodScheme, aggregate_supply_period2, phi1_banking_withdrawal,
    phi1_borrowing, phi2, single_period_terminal,
)
from .stack import (
    ActiveSet, CustomStack, StackParams, active_set, bau_emissions_rate, electricity_price,
    emissions_rate, max_emissions_rate,
)

__all__ = [
    "ActiveSet", "CarbonStackError", "ConfigError", "ConvergenceError", "CustomStack",
    "DomainError", "ErrorReport", "Grid", "GridError", "InstabilityError", "JacobiParams",
    "McResult", "Mechanism", "MechanismError", "MissingAllowanceError", "OptionSpec",
    "ParameterError", "PathConfig", "RefinementLevel", "SchemeParams", "StackParams",
    "SurfaceSeries", "TABLE5_LEVELS", "TwoPeriodScheme", "TwoPeriodSolution", "ValueSurface",
    "active_set", "aggregate_supply_period2", "backend_name", "bau_emissions_rate",
    "cfl_max_dt", "electricity_price", "emissions_rate", "error_norms", "evaluate",
    "grid_for_caps", "max_emissions_rate", "penalty_sweep", "phi1_banking_withdrawal",
    "phi1_borrowing", "phi2", "price_call", "refinement_study", "simulate",
    "single_period_terminal", "snap_cap", "solve_call", "solve_single_period",
    "solve_two_period", "step_backward", "validate",
]
