"""Exception types shared across the package."""


class ContractError(ValueError):
    """An input violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A numerical routine could not produce a trustworthy answer."""


class PoolFormatError(ValueError):
    """A pool or structured file is malformed."""
