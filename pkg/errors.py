class TridiagError(Exception):
    """Base class for every failure the toolkit reports."""

    exit_code = 1


class ParseError(TridiagError):
    """Malformed space file or invalid construction input."""

    exit_code = 2


class DomainError(TridiagError):
    """Argument outside the range an operation accepts (λ = 0, truncation too small, ...)."""

    exit_code = 3


class UncertifiedError(TridiagError):
    """A certified number was required but only a flagged partial value exists."""

    exit_code = 4
