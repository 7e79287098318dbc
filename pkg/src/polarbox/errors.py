"""Exception types shared across the package."""


class PolarboxError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(PolarboxError):
    """Input violates a documented precondition (shape, range, count)."""


class DegenerateGeometry(PolarboxError):
    """Geometry has no usable extent (zero area, coincident points, ...)."""


class NonConvexInput(PolarboxError):
    """A convex polygon was required but the input is not convex."""


class NonFiniteDiameter(PolarboxError):
    """A polar ratio is too close to zero to yield a finite diameter."""


class ParseError(PolarboxError):
    """A text record could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
