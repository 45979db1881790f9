"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Anything else is a bug.
"""


class FieldVaeError(Exception):
    """Base class for all package errors."""


class ConfigError(FieldVaeError):
    """Invalid configuration: bad shapes, bad hyperparameters, bad schema."""


class DataError(FieldVaeError):
    """Missing or inconsistent data artifacts (datasets, checkpoints)."""


class NumericError(FieldVaeError):
    """Non-finite values encountered where finite ones are required."""


class CheckpointError(DataError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version not supported by this build."""


class CheckpointCorruptError(CheckpointError):
    """Checkpoint file is unreadable or its payload is inconsistent."""


class CheckpointShapeError(CheckpointError):
    """A stored tensor does not match the shape implied by its config."""
