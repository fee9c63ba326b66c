"""Exception hierarchy.

The CLI maps these onto exit codes: validation failures exit 1, parse
errors exit 2 and numerical failures exit 3.
"""


class LatcorrError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ValidationError(LatcorrError, ValueError):
    """Input is well formed but violates a structural requirement."""

    exit_code = 1


class UVCError(ValidationError):
    """Some higher-level variables have fewer than two unique members."""

    def __init__(self, offending):
        self.offending = tuple(offending)
        names = ", ".join(str(o) for o in self.offending)
        super().__init__(
            f"unique-variable condition violated (fewer than 2 unique members): {names}"
        )


class ParseError(LatcorrError, ValueError):
    """Input file could not be read or is malformed."""

    exit_code = 2


class NumericalError(LatcorrError, ArithmeticError):
    """A computation cannot proceed on the given numbers."""

    exit_code = 3
