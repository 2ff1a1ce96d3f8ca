"""Exception hierarchy shared by all modules.

Every exception carries a short machine-readable ``category`` so the command
line front-end can report failures without parsing messages.
"""


class AdaptImpactError(Exception):
    category = "error"


class SchemaError(AdaptImpactError, ValueError):
    category = "schema"


class ValidationError(AdaptImpactError, ValueError):
    category = "validation"


class DomainError(AdaptImpactError, ValueError):
    category = "domain"


class EvaluationError(AdaptImpactError, ArithmeticError):
    """A property function returned a non-finite value."""

    category = "evaluation"

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class OptimalityViolation(AdaptImpactError, ArithmeticError):
    category = "optimality"


class ConsistencyError(AdaptImpactError, ArithmeticError):
    category = "consistency"


class ConvergenceError(AdaptImpactError, RuntimeError):
    """Iterative solver gave up; ``best`` holds the best point seen so far."""

    category = "convergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class SingularMatrixError(AdaptImpactError, ValueError):
    category = "singular"


class ParameterInconsistency(AdaptImpactError, ValueError):
    category = "parameters"


class InfeasibleDemand(AdaptImpactError, ValueError):
    category = "infeasible-demand"


class DataFormatError(AdaptImpactError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    category = "data"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BoundaryWarning(UserWarning):
    """A finite difference had to fall back to a one-sided stencil."""
