class DomainError(ValueError):
    """An argument lies outside the domain of a constitutive or energy function."""


class ConfigurationError(ValueError):
    """A scenario or an operation was set up inconsistently."""


class ValidationError(ConfigurationError):
    """Aggregated scenario validation failure; ``violations`` lists every problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class SolverError(RuntimeError):
    """A linear or nonlinear solve did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OracleSizeError(ConfigurationError):
    """The brute-force oracle refused an instance that is too large."""
