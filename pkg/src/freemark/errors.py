"""Exception hierarchy shared across the package.

Every error that maps to a CLI exit code lives here so the command-line
front end can translate uniformly.
"""


class FreemarkError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(FreemarkError):
    """Operands have incompatible shapes."""


class ConfigError(FreemarkError):
    """Invalid configuration or malformed config file (CLI exit 2)."""


class TrainingDivergedError(FreemarkError):
    """Loss became non-finite during SGD (CLI exit 3)."""


class NothingToTrainError(FreemarkError):
    """Fine-tune requested with every layer frozen."""


class KeyDerivationError(FreemarkError):
    """Gradient descent failed to reach an exact watermark match (CLI exit 4)."""

    def __init__(self, message: str, mismatches: int, iterations: int):
        super().__init__(message)
        self.mismatches = mismatches
        self.iterations = iterations


class AlphaSearchError(FreemarkError):
    """No scaling factor in the configured grid satisfies the security
    constraint (CLI exit 5)."""


class DegenerateActivationError(FreemarkError):
    """Mean activation vector is identically zero; shift key would be
    independent of the scaling factor."""


class IncompatibleArchitectureError(FreemarkError):
    """Suspect model has no layer compatible with the key pair (CLI exit 6)."""


class TriggerDigestMismatchError(FreemarkError):
    """Supplied trigger set does not match the digest stored with the keys."""


class CommitmentMismatchError(FreemarkError):
    """Claimed watermark does not hash to the registered commitment (CLI exit 7)."""


class RecordNotFoundError(FreemarkError):
    """Key id is not present in the store."""


class StoreIntegrityError(FreemarkError):
    """Stored record bytes fail hash verification."""


class ExperimentFailure(FreemarkError):
    """One or more experiment cells violated their built-in assertion
    (CLI exit 8)."""

    def __init__(self, message: str, failed_cells: list[str]):
        super().__init__(message)
        self.failed_cells = failed_cells
