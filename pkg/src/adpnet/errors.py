"""Exception types shared across the package."""


class AdpnetError(Exception):
    """Base class for all package errors."""


class ValidationError(AdpnetError):
    """An input violates a documented precondition or invariant."""


class ParseError(AdpnetError):
    """A file could not be parsed; the message names the offending line."""


class SingularIntegrandError(AdpnetError):
    """A measure point sits exactly on the network while p < 2 makes the
    integrand weight |x - sigma|^(p-2) undefined; names the point index."""

    def __init__(self, index: int, message: str | None = None):
        self.index = int(index)
        super().__init__(message or f"singular integrand: measure point {index} lies exactly on the network")


class MollificationError(AdpnetError):
    """Bandwidth halving exhausted without reaching the pairing condition."""


class DegenerateGeometryError(AdpnetError):
    """An operation produced a degenerate network (for example a collapsed edge)."""


class UnsupportedRegimeError(AdpnetError):
    """The requested exponent p is outside the range the operation supports."""
