"""Exception types shared across the package."""


class LocalLawError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(LocalLawError, ValueError):
    """A parameter is outside its admissible range."""


class DomainError(LocalLawError, ValueError):
    """A spectral parameter lies outside the requested domain."""


class BranchError(LocalLawError, ValueError):
    """A square-root branch is undefined at the requested point."""


class SingularError(LocalLawError, ArithmeticError):
    """A resolvent or reciprocal is evaluated at a singular point."""


class PreconditionError(LocalLawError, ValueError):
    """An operation was applied to an object that violates its precondition."""


class ResourceError(LocalLawError, RuntimeError):
    """A configured size or node budget was exceeded.

    The ``partial`` attribute carries whatever was built before the budget ran out.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
