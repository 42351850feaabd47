"""Exception types shared across the package."""


class DiffeolabError(Exception):
    """Base class for all package errors."""


class ChartError(DiffeolabError, ValueError):
    """Invalid chart description."""


class ChartMismatchError(DiffeolabError, ValueError):
    """Operands live on different charts."""


class OutOfDomainError(DiffeolabError, ValueError):
    """Query point outside a bounded box chart."""


class MarginViolationError(DiffeolabError, ValueError):
    """A transported node left the chart: the map does not respect the margin."""


class RegionError(DiffeolabError, ValueError):
    """Ball region does not fit inside the chart interior."""


class InvalidMetricError(DiffeolabError, ValueError):
    """Metric matrix is not symmetric positive definite."""


class InvalidDensityError(DiffeolabError, ValueError):
    """Volume density is not strictly positive."""


class InvalidExponentError(DiffeolabError, ValueError):
    """Norm exponent outside [1, inf)."""


class SingularJacobianError(DiffeolabError, ValueError):
    """Jacobian determinant vanished (or went negative) at a node."""


class StepBudgetError(DiffeolabError, ValueError):
    """Point transport cannot reach the target within the requested steps."""


class ConstructionError(DiffeolabError, ValueError):
    """A diffeomorphism constructor rejected its parameters."""


class DegenerateFieldError(DiffeolabError, ValueError):
    """Vector field vanishes where a construction needs it nonzero."""


class UnderResolvedError(DiffeolabError, ValueError):
    """Grid resolution is insufficient to resolve the requested feature."""


class BudgetError(DiffeolabError, RuntimeError):
    """Iteration budget exhausted before reaching the requested accuracy."""


class CoverError(DiffeolabError, ValueError):
    """Ball cover is too large or misses the field support."""


class ConfigError(DiffeolabError, ValueError):
    """Experiment configuration could not be parsed or validated."""
