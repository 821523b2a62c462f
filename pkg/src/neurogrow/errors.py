"""Exception types raised across the package."""


class NumericOverflowError(ArithmeticError):
    """Simulation state became non-finite."""

    def __init__(self, step: int, what: str = "state"):
        super().__init__(f"non-finite {what} detected at step {step}")
        self.step = step


class FormatError(ValueError):
    """A binary or text file does not match its expected layout."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SizeLimitError(ValueError):
    pass


class SingularSystemError(ArithmeticError):
    pass
