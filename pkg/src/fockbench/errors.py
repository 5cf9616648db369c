class FockbenchError(Exception):
    pass


class DimensionError(FockbenchError, ValueError):
    pass


class TruncationError(FockbenchError, ValueError):
    """Raised when a cutoff is too small for a computation to be exact."""


class SingularFieldError(FockbenchError, ArithmeticError):
    """A diagonal regularity block V_{n,n} is numerically singular."""


class SingularEmbeddingError(FockbenchError, ValueError):
    """The embedding K is not injective (up to numerical rank)."""


class ConsistencyError(FockbenchError, ArithmeticError):
    """Two independent constructions of the same object disagree."""


class GramError(FockbenchError, ArithmeticError):
    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level
