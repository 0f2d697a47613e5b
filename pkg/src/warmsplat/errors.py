"""Exception hierarchy shared across the package.

CLI exit-code mapping: ConfigError -> 2, DataFormatError / IntegrityError /
FrameNotFoundError -> 3, NumericalError -> 4.
"""


class WarmsplatError(Exception):
    pass


class InvalidInputError(WarmsplatError, ValueError):
    """Caller violated a documented precondition."""


class ConfigError(WarmsplatError):
    """Configuration file is missing, malformed, or schema-violating."""


class DataFormatError(WarmsplatError):
    """On-disk data (dataset, transforms.json, COLMAP text, ...) is malformed."""


class IntegrityError(WarmsplatError):
    """Stored record failed its checksum."""


class FrameNotFoundError(WarmsplatError, KeyError):
    """Requested time index is outside the archive range."""


class NumericalError(WarmsplatError):
    """Non-finite loss or gradient encountered during optimization."""
