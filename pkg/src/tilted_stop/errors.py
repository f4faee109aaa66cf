"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the domain of the requested operation."""


class SizeLimitError(ValueError):
    """The requested size exceeds a configured enumeration or scan bound."""


class NumericError(ArithmeticError):
    """A non-finite intermediate value was produced."""
