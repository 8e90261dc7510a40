"""Exception types shared across the package."""


class A3psError(Exception):
    pass


class ConfigError(A3psError, ValueError):
    pass


class ContractError(A3psError, RuntimeError):
    """A precondition of an operation was violated by the caller."""


class ShapeError(A3psError, ValueError):
    pass


class NumericError(A3psError, ArithmeticError):
    pass


class CapacityError(A3psError, RuntimeError):
    pass


class CoverageError(A3psError, LookupError):
    pass


class ParseError(A3psError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
