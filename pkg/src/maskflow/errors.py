"""Exception hierarchy shared across modules.

Every error carries a machine-readable category used by the CLI to pick
exit codes and error prefixes: io | format | config | dimension.
"""


class MaskflowError(Exception):
    """Base class for all errors raised by this package."""

    category = "internal"


class FormatError(MaskflowError):
    """Malformed or invalid file content (bad magic, truncation, bad values)."""

    category = "format"


class ConfigError(MaskflowError):
    """Invalid configuration or parameter value."""

    category = "config"


class DimensionError(MaskflowError):
    """Shape mismatch between arrays that must agree."""

    category = "dimension"
