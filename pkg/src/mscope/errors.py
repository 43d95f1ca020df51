"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ConfigError/DimensionError -> 2,
CapacityError -> 3, FormatError and OSError -> 4.
"""


class MscopeError(Exception):
    """Base class for all package-specific errors."""


class FormatError(MscopeError):
    """Unreadable file, bad magic bytes, truncated payload, or an
    unsupported image encoding (e.g. 16-bit depth)."""


class DimensionError(MscopeError, ValueError):
    """Array shape violates an operation's divisibility/parity contract."""


class ConfigError(MscopeError, ValueError):
    """Invalid parameter or inconsistent experiment configuration."""


class CapacityError(MscopeError):
    """A construction would exceed the configured memory budget."""
