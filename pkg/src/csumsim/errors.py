"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad registry, mode binding, port list or parameter value."""


class NormalizationError(ConfigurationError):
    """Input amplitudes are not unit-normalized."""


class DomainError(ValueError):
    """Argument outside the domain of a mathematical operation."""


class SingularParameterError(ArithmeticError):
    """Parameters make a closed-form expression divide by zero."""


class UndefinedFidelityError(ArithmeticError):
    """Fidelity requested for a zero-norm state."""
