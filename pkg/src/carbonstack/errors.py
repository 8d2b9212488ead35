"""Exception hierarchy shared by all modules."""


class CarbonStackError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CarbonStackError, ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(CarbonStackError, ValueError):
    """A parameter set violates its invariants."""


class ConvergenceError(CarbonStackError, ArithmeticError):
    """A root find did not reach its tolerance."""


class MechanismError(CarbonStackError, ValueError):
    """A terminal payoff was requested for the wrong connecting mechanism."""


class GridError(CarbonStackError, ValueError):
    """Mesh does not fit the problem (spacing, cap alignment, nesting, CFL)."""


class InstabilityError(CarbonStackError, ArithmeticError):
    """The explicit scheme left its admissible value range."""


class MissingAllowanceError(CarbonStackError, LookupError):
    """Stored allowance surfaces do not cover the requested time range."""


class ConfigError(CarbonStackError, ValueError):
    """Configuration file could not be parsed or validated."""
