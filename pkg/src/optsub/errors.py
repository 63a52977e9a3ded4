"""Exception types raised across the package."""


class OptsubError(Exception):
    """Base class for all package errors."""


class Singular(OptsubError):
    """An information matrix could not be inverted."""


class NotPositiveDefinite(Singular):
    pass


class NotConverged(OptsubError):
    pass


class Separation(NotConverged):
    """Logistic fit diverged, typically because the classes are separable."""


class EmptyRiskSet(OptsubError):
    pass


class EmptyPool(OptsubError):
    pass


class AllZeroWeights(OptsubError):
    pass


class ZeroProbability(OptsubError):
    pass


class AllZeroScores(OptsubError):
    pass


class OneClassEmpty(OptsubError):
    pass


class QExceedsN(OptsubError):
    pass


class DimensionMismatch(OptsubError):
    pass


class OutOfRange(OptsubError):
    pass


class SchemaError(OptsubError):
    pass


class ParseError(OptsubError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
