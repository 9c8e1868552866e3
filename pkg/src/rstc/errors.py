"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to.
"""


class RSTCError(Exception):
    exit_code = 1


class ValidationError(RSTCError, ValueError):
    """Input outside the domain of an operation."""


class CapacityError(ValidationError):
    """Requested size exceeds a configured guard."""


class DegenerateSourceError(ValidationError):
    """Spectrum carries no energy."""


class FormatError(RSTCError):
    """Malformed or truncated binary file."""

    exit_code = 2


class ConvergenceError(RSTCError, ArithmeticError):
    """Iterative solver failed to reach its tolerance."""

    exit_code = 3
