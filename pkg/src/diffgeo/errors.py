"""Exception hierarchy shared by all stages."""


class DiffGeoError(Exception):
    """Base class for library errors."""


class InvalidArgument(DiffGeoError, ValueError):
    """A caller supplied an argument outside the documented domain."""


class ParseError(InvalidArgument):
    """Malformed input file."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericError(DiffGeoError, ArithmeticError):
    """A numerical routine failed or produced unusable output."""


class DegenerateSpace(NumericError):
    """Every eigenvalue of a Gram matrix fell below the threshold."""


class ResourceError(DiffGeoError, MemoryError):
    """An assembly would exceed the configured memory budget."""

    def __init__(self, what, required, budget):
        super().__init__(
            f"{what} needs about {required:,} bytes, over the budget of {budget:,} bytes"
        )
        self.required = required
        self.budget = budget


class MissingArtifact(DiffGeoError, LookupError):
    """A downstream stage was requested before its inputs exist."""
