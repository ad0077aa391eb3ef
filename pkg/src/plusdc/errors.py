"""Exception types shared across the package."""


class PlusDCError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PlusDCError):
    """Malformed user-supplied data (bad CSV rows, invalid ranks, ...)."""


class ConfigError(PlusDCError):
    """Invalid option combination or unsatisfiable configuration."""


class CapabilityError(PlusDCError):
    """Requested exact computation exceeds the supported problem size."""


class DomainError(PlusDCError):
    """Structurally valid data outside an operation's domain."""


class NumericError(PlusDCError):
    """Numerical failure that invalidates a result."""
