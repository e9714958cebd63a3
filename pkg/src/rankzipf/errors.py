"""Exception hierarchy shared by all rankzipf modules."""


class RankZipfError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RankZipfError, ValueError):
    """Input rejected by a validation rule."""


class NonPositiveProbability(ValidationError):
    pass


class SumNotOne(ValidationError):
    def __init__(self, deviation: float):
        self.deviation = deviation
        super().__init__(f"probabilities sum to 1{deviation:+.3e}, not 1")


class TooFewLetters(ValidationError):
    pass


class InvalidDistribution(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class DomainError(RankZipfError, ValueError):
    """Argument outside the mathematical domain of the operation."""


class NotLattice(RankZipfError, ValueError):
    """A lattice-only operation was given a non-lattice alphabet."""


class SingularMatrix(RankZipfError, ArithmeticError):
    pass


class BudgetExceeded(RankZipfError, RuntimeError):
    """Work budget exhausted; ``partial`` holds whatever was computed so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class ParseError(RankZipfError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
