"""Exception types shared across the package.

The CLI maps these onto its exit codes: ConfigError -> 2,
NumericError -> 3, DataFormatError and lock conflicts -> 4.
"""


class EmonetError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EmonetError):
    """Invalid configuration: unknown keys, bad values, inconsistent settings."""


class DataFormatError(EmonetError):
    """Malformed input data or on-disk artifacts (datasets, checkpoints, results)."""


class NumericError(EmonetError):
    """Numeric failure during training or evaluation (NaN loss, divergence)."""


class EmptyEffectiveDatasetError(NumericError):
    """Every sample weight is zero: nothing left to train on."""
