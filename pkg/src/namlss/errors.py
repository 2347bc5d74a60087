"""Exception taxonomy shared by every module.

The CLI maps these onto exit codes: config problems exit 2, data and
support problems exit 3, numeric failures exit 4.
"""


class NamlssError(Exception):
    """Base class for all library errors."""


class ShapeError(NamlssError):
    """Array dimensions do not match the declared layer/feature chain."""


class NumericError(NamlssError):
    """Non-finite values where finite ones are required, or a diverged fit."""


class ContractError(NamlssError):
    """API misuse: stale cache, unsupported family for an operation, etc."""


class SupportError(NamlssError):
    """Response values outside the distribution family's support."""


class ConfigError(NamlssError):
    """Invalid configuration, preset, or command-line usage."""


class DataError(NamlssError):
    """Problems in ingested data: degenerate columns, unseen categories."""


class FormatError(NamlssError):
    """Malformed or version-incompatible serialized documents."""
