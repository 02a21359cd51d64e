"""Exception types raised across the package."""


class MomconeError(Exception):
    """Base class for all package errors."""


class UnsupportedMonomial(MomconeError, KeyError):
    """A polynomial term or requested index is missing from a support."""

    def __str__(self):
        return Exception.__str__(self)


class DimensionMismatch(MomconeError, ValueError):
    pass


class OrderTooSmall(MomconeError, ValueError):
    """The relaxation order cannot accommodate the degrees involved."""


class NumericalFailure(MomconeError, RuntimeError):
    pass


class DecodeFailure(MomconeError, RuntimeError):
    """Solver output could not be turned into a verified witness."""


class ExtractionFailure(MomconeError, RuntimeError):
    pass


class RankDeficient(MomconeError, ValueError):
    pass


class ProblemFileError(MomconeError, ValueError):
    """Invalid problem file; ``path`` points at the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
