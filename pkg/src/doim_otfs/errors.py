"""Exception types raised across the package."""


class DoimError(Exception):
    """Base class for all package errors."""


class DimensionError(DoimError, ValueError):
    """Array shape or bit length does not match the frame layout."""


class CodebookError(DoimError, ValueError):
    """Index-modulation rank or activation pattern outside the codebook."""


class ConfigError(DoimError, ValueError):
    """Invalid simulation or channel configuration."""
