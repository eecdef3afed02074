"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions disagree with the market or strategy layout."""


class BoundViolation(ValueError):
    """A price leaves the admissible box of the market."""

    def __init__(self, message: str, index: tuple[int, ...] | None = None):
        super().__init__(message)
        self.index = index


class DegenerateVariance(ValueError):
    """A ratio or score is undefined because its dispersion term is zero."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity appeared in a forward or backward pass."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


class DivergenceError(RuntimeError):
    """Training produced a non-finite objective; the partial trace is attached."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


class EnumerationBudgetExceeded(RuntimeError):
    """The oracle grid has more strategies than the configured budget allows."""


class DataError(ValueError):
    """Malformed or insufficient price data."""
