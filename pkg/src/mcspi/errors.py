"""Exception types shared across the package.

Plain ``ValueError`` is used for argument/domain violations; the classes
here mark conditions the CLI maps to distinct exit codes.
"""


class McspiError(Exception):
    """Base class for package-specific failures."""


class ConfigError(McspiError):
    """Invalid or inconsistent experiment configuration (CLI exit 2)."""


class ProtocolError(McspiError):
    """Stream, plan, or fix sequences that do not line up (CLI exit 3)."""


class NoObjectError(McspiError):
    """Total detected intensity too small to locate an object (CLI exit 4)."""


class CapacityError(McspiError):
    """Requested pattern matrix would not fit in memory (CLI exit 4)."""


class EmptyAccumulatorError(McspiError):
    """Finalize called on an accumulator with no patterns (CLI exit 4)."""
