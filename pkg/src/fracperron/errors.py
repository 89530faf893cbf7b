"""Exception hierarchy shared by every module of the package."""


class FracPerronError(Exception):
    """Base class for all errors raised by :mod:`fracperron`."""


class DomainError(FracPerronError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PrecisionError(FracPerronError, ArithmeticError):
    """The requested tolerance cannot be reached by the implemented methods."""


class IllConditionedError(FracPerronError, ArithmeticError):
    """The eigenvector basis is too ill-conditioned to be trusted."""


class DefectiveMatrixError(IllConditionedError):
    """The matrix is defective and no usable Jordan structure is available."""


class NotHyperbolicError(FracPerronError):
    """An operation needs a hyperbolic spectrum but got a non-hyperbolic one."""


class SectorError(FracPerronError, ValueError):
    """An eigenvalue lies in the wrong stability sector for the operation."""


class MissingSupNormError(FracPerronError, ValueError):
    """A tabulated forcing needs a declared sup-norm but has none."""


class PreconditionError(FracPerronError, ValueError):
    """A documented precondition (other than a sector condition) is violated."""


class ParseError(FracPerronError, ValueError):
    """A system specification could not be parsed.

    ``field`` names the offending JSON path when it is known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
