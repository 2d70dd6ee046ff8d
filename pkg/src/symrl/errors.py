class ContractViolation(ValueError):
    """Raised when an argument breaks an operation's precondition."""


class NumericError(ArithmeticError):
    """Raised when a computation produces or receives a non-finite value."""


class ValidationError(ValueError):
    """Raised for invalid experiment configurations."""
